//! Runtime comparison of one stochastic replicate against one ODE solve.
//!
//! Every timed workload is divided by the runtime of a reference loop
//! summing `1..=N`, measured right after it, so that ratios are roughly
//! comparable across machines. Everything runs on the calling thread.

use std::hint::black_box;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::Result;
use crate::integrator::IntegratorConfig;
use crate::reduced::ReducedModel;
use crate::scenario::Scenario;

/// Sums `1..=n` one addition at a time.
pub fn reference_loop(n: u64) -> u64 {
    let mut acc = 0u64;
    for k in 1..=n {
        acc = acc.wrapping_add(black_box(k));
    }
    acc
}

pub fn time<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        Self {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub scenario: String,
    pub label: Option<String>,
    pub horizon: f64,
    /// Stochastic replicate runtime over reference runtime.
    pub ssa: Summary,
    /// ODE solve runtime over reference runtime.
    pub ode: Summary,
    /// `ode.mean / ssa.mean`; below one the ODE is faster.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub reference_n: u64,
    pub reference_value: u64,
    pub runs: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "scenario,label,horizon,ssa_mean,ssa_min,ssa_max,ode_mean,ode_min,ode_max,ratio"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.scenario,
                r.label.as_deref().unwrap_or(""),
                r.horizon,
                r.ssa.mean,
                r.ssa.min,
                r.ssa.max,
                r.ode.mean,
                r.ode.min,
                r.ode.max,
                r.ratio
            )?;
        }
        Ok(())
    }
}

/// Times `runs` independent stochastic replicates and ODE solves per
/// scenario, each normalised by a reference loop of length `reference_n`.
pub fn run(scenarios: &[Scenario], runs: usize, reference_n: u64) -> Result<BenchReport> {
    let mut reference_value = 0;
    let mut normalise = |d: Duration| {
        let (v, r) = time(|| reference_loop(reference_n));
        reference_value = v;
        d.as_secs_f64() / r.as_secs_f64().max(1e-9)
    };
    let mut rows = Vec::with_capacity(scenarios.len());
    for sc in scenarios {
        let horizon = sc.resolve_horizon()?;
        let setup = sc.ensemble_setup();
        let params = sc.reduced_params()?;
        let sampling = sc.sampling();
        let mut ssa = Vec::with_capacity(runs);
        let mut ode = Vec::with_capacity(runs);
        for run in 0..runs {
            let (res, d) = time(|| setup.replicate(sc.seed, run as u64, horizon, &sampling));
            black_box(res?);
            ssa.push(normalise(d));

            let (res, d) = time(|| -> Result<f64> {
                let model = ReducedModel::new(params.clone())?;
                let y0 = model.initial_condition(sc.initial_fraction())?;
                Ok(model.solve(&y0, horizon, &IntegratorConfig::default())?.i(horizon))
            });
            black_box(res?);
            ode.push(normalise(d));
        }
        let (ssa, ode) = (Summary::of(&ssa), Summary::of(&ode));
        rows.push(BenchRow {
            scenario: sc.name.clone(),
            label: sc.label.clone(),
            horizon,
            ssa,
            ode,
            ratio: ode.mean / ssa.mean,
        });
    }
    Ok(BenchReport {
        reference_n,
        reference_value,
        runs,
        rows,
    })
}
