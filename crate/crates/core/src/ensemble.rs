//! Independent replicates of the stochastic process, run in parallel.
//!
//! Replicate `r` draws its population graph and its dynamics from
//! `rng::stream(seed, r)`, so results do not depend on thread scheduling.

use rayon::prelude::*;

use crate::engine::{simulate, EpidemicParams, SamplingOptions, SimulationState, Step, Trajectory, TypeHistogram};
use crate::error::{Error, Result};
use crate::graph::PopulationGraph;
use crate::rng::{stream, RandomStream};
use crate::size_dist::SizeDistribution;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Seeding {
    /// `round(ε·K)` uniformly chosen infected.
    Fraction(f64),
    /// One uniformly chosen infected.
    Single,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSetup {
    pub population: usize,
    pub households: SizeDistribution,
    pub workplaces: SizeDistribution,
    pub params: EpidemicParams,
    pub seeding: Seeding,
    /// Use the rate-`γ·I` recovery channel (exponential periods only).
    pub markovian: bool,
}

impl EnsembleSetup {
    /// Fresh graph and seeded state for one replicate.
    pub fn initial_state(&self, rng: &mut RandomStream) -> Result<SimulationState> {
        let graph = PopulationGraph::build(self.population, &self.households, &self.workplaces, rng)?;
        let state = match self.seeding {
            Seeding::Fraction(eps) => SimulationState::init_uniform_seed(graph, &self.params, eps, rng)?,
            Seeding::Single => SimulationState::init_single_seed(graph, &self.params, rng)?,
        };
        if self.markovian {
            state.into_markovian(&self.params)
        } else {
            Ok(state)
        }
    }

    pub fn replicate(&self, seed: u64, r: u64, horizon: f64, sampling: &SamplingOptions) -> Result<Trajectory> {
        let mut rng = stream(seed, r);
        let mut state = self.initial_state(&mut rng)?;
        simulate(&mut state, &self.params, horizon, &mut rng, sampling, &mut [])
    }

    /// Runs replicates `0..replicates` in parallel, in replicate order.
    pub fn run(
        &self,
        seed: u64,
        replicates: usize,
        horizon: f64,
        sampling: &SamplingOptions,
    ) -> Result<Vec<Trajectory>> {
        (0..replicates as u64)
            .into_par_iter()
            .map(|r| self.replicate(seed, r, horizon, sampling))
            .collect()
    }

    /// Pooled remaining infectious periods of the individuals infected at
    /// time `t`, over `replicates` runs.
    pub fn remaining_periods_at(&self, seed: u64, replicates: usize, t: f64) -> Result<Vec<f64>> {
        let per: Vec<Vec<f64>> = (0..replicates as u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream(seed, r);
                let mut state = self.initial_state(&mut rng)?;
                while let Step::Event(_) = state.advance(&self.params, &mut rng, t) {}
                Ok(state.remaining_periods())
            })
            .collect::<Result<_>>()?;
        Ok(per.into_iter().flatten().collect())
    }

    /// Runs single-seed epidemics until the infected proportion first
    /// reaches `stop_level` and averages the structure histograms observed
    /// at that moment. Replicates in which the infection dies out first are
    /// discarded.
    pub fn infer_initial_condition(&self, seed: u64, replicates: usize, stop_level: f64) -> Result<InferredIc> {
        let setup = Self {
            seeding: Seeding::Single,
            ..self.clone()
        };
        let snapshots: Vec<Option<TypeHistogram>> = (0..replicates as u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream(seed, r);
                let mut state = setup.initial_state(&mut rng)?;
                let target = stop_level * state.population() as f64;
                loop {
                    if state.infected() as f64 >= target {
                        return Ok(Some(state.type_histogram()));
                    }
                    if state.step(&setup.params, &mut rng).is_none() || state.infected() == 0 {
                        return Ok(None);
                    }
                }
            })
            .collect::<Result<_>>()?;
        let kept: Vec<TypeHistogram> = snapshots.into_iter().flatten().collect();
        let histogram = TypeHistogram::average(&kept).ok_or(Error::EmptySelection)?;
        Ok(InferredIc {
            histogram,
            retained: kept.len(),
            discarded: replicates - kept.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InferredIc {
    pub histogram: TypeHistogram,
    pub retained: usize,
    pub discarded: usize,
}
