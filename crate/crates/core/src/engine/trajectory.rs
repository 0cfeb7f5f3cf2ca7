use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::EpidemicParams;
use super::state::{Channel, Event, SimulationState, Step, TypeHistogram};
use crate::error::{Error, Result};
use crate::graph::Layer;

/// Population counts at one instant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub s: u64,
    pub i: u64,
    pub r: u64,
    pub cum_g: u64,
    pub cum_h: u64,
    pub cum_w: u64,
}

impl Sample {
    pub fn of(state: &SimulationState) -> Self {
        Self {
            t: state.time(),
            s: state.susceptible(),
            i: state.infected(),
            r: state.recovered(),
            cum_g: state.cumulative(Channel::Global),
            cum_h: state.cumulative(Channel::Household),
            cum_w: state.cumulative(Channel::Workplace),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistogramSnapshot {
    pub t: f64,
    pub histogram: TypeHistogram,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub population: usize,
    pub samples: Vec<Sample>,
    pub histograms: Vec<HistogramSnapshot>,
    pub events: Vec<Event>,
}

pub const TRAJECTORY_HEADER: &str = "t,S,I,R,cumG,cumH,cumW";
pub const HISTOGRAM_HEADER: &str = "t,layer,S,I,count";

impl Trajectory {
    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{TRAJECTORY_HEADER}")?;
        for s in &self.samples {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.t, s.s, s.i, s.r, s.cum_g, s.cum_h, s.cum_w
            )?;
        }
        Ok(())
    }

    /// Reads samples written by [`Trajectory::write_csv`]. The population
    /// size is recovered as `S + I + R` of the first row.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != TRAJECTORY_HEADER {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header {TRAJECTORY_HEADER:?}"),
            });
        }
        let mut samples = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |msg: String| Error::Parse { line: n + 2, msg };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(parse_err(format!("expected 7 fields, got {}", fields.len())));
            }
            let t = fields[0].parse::<f64>().map_err(|e| parse_err(e.to_string()))?;
            let mut ints = [0u64; 6];
            for (slot, f) in ints.iter_mut().zip(&fields[1..]) {
                *slot = f
                    .parse()
                    .map_err(|e: std::num::ParseIntError| parse_err(e.to_string()))?;
            }
            samples.push(Sample {
                t,
                s: ints[0],
                i: ints[1],
                r: ints[2],
                cum_g: ints[3],
                cum_h: ints[4],
                cum_w: ints[5],
            });
        }
        let population = samples.first().map_or(0, |s| (s.s + s.i + s.r) as usize);
        Ok(Self {
            population,
            samples,
            ..Default::default()
        })
    }

    pub fn write_histogram_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{HISTOGRAM_HEADER}")?;
        for snap in &self.histograms {
            for layer in Layer::BOTH {
                for ((s, i), count) in snap.histogram.layer(layer) {
                    writeln!(out, "{},{},{},{},{}", snap.t, layer.tag(), s, i, count)?;
                }
            }
        }
        Ok(())
    }

    /// Event log as JSON lines.
    pub fn write_events<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e).map_err(std::io::Error::from)?;
            writeln!(out)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplingOptions {
    /// Spacing of the regular sampling grid.
    pub dt: f64,
    /// Also record a sample after every event.
    pub every_event: bool,
    /// Record the `(S, I)` structure histogram at grid points.
    pub histograms: bool,
    /// Keep the full event log.
    pub event_log: bool,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        Self {
            dt: 1.0,
            every_event: false,
            histograms: false,
            event_log: false,
        }
    }
}

/// Receives every executed event together with the post-event state.
pub trait Observer {
    fn on_event(&mut self, state: &SimulationState, event: &Event);
}

impl<F: FnMut(&SimulationState, &Event)> Observer for F {
    fn on_event(&mut self, state: &SimulationState, event: &Event) {
        self(state, event)
    }
}

/// Runs the process up to `horizon`, sampling on the grid
/// `t0, t0 + dt, …` (plus `horizon` itself). Extinction ends the dynamics
/// but the remaining grid points are still recorded.
pub fn simulate<R: Rng + ?Sized>(
    state: &mut SimulationState,
    params: &EpidemicParams,
    horizon: f64,
    rng: &mut R,
    options: &SamplingOptions,
    observers: &mut [&mut dyn Observer],
) -> Result<Trajectory> {
    if !(horizon >= state.time()) {
        return Err(Error::InvalidParameter(format!(
            "horizon {horizon} precedes the current time {}",
            state.time()
        )));
    }
    if !(options.dt > 0.0) {
        return Err(Error::InvalidParameter("sampling step must be positive".into()));
    }
    let t0 = state.time();
    let mut grid: Vec<f64> = Vec::new();
    let mut j = 0u64;
    loop {
        let g = t0 + j as f64 * options.dt;
        if g > horizon * (1.0 + 1e-12) {
            break;
        }
        grid.push(g.min(horizon));
        j += 1;
    }
    if grid.last().is_some_and(|&g| g < horizon) {
        grid.push(horizon);
    }

    let mut traj = Trajectory {
        population: state.population(),
        ..Default::default()
    };
    let mut extinct = false;
    for &g in &grid {
        while !extinct {
            match state.advance(params, rng, g) {
                Step::Event(event) => {
                    for obs in observers.iter_mut() {
                        obs.on_event(state, &event);
                    }
                    if options.every_event {
                        traj.samples.push(Sample::of(state));
                    }
                    if options.event_log {
                        traj.events.push(event);
                    }
                }
                Step::Horizon => break,
                Step::Extinct => extinct = true,
            }
        }
        let mut sample = Sample::of(state);
        sample.t = g;
        traj.samples.push(sample);
        if options.histograms {
            traj.histograms.push(HistogramSnapshot {
                t: g,
                histogram: state.type_histogram(),
            });
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::InfectiousPeriod;
    use crate::graph::PopulationGraph;
    use crate::rng::stream;
    use crate::size_dist::SizeDistribution;

    fn setup(epsilon: f64, seed: u64) -> (SimulationState, EpidemicParams) {
        let h = SizeDistribution::from_pairs([(1, 0.3), (2, 0.4), (3, 0.3)]).unwrap();
        let w = SizeDistribution::from_pairs([(5, 0.5), (10, 0.5)]).unwrap();
        let mut rng = stream(seed, 0);
        let g = PopulationGraph::build(500, &h, &w, &mut rng).unwrap();
        let p = EpidemicParams::markovian(0.3, 0.5, 0.05, 0.2);
        let s = SimulationState::init_uniform_seed(g, &p, epsilon, &mut rng).unwrap();
        (s, p)
    }

    #[test]
    fn zero_horizon_is_the_initial_state() {
        let (mut s, p) = setup(0.02, 1);
        let before = Sample::of(&s);
        let traj = simulate(&mut s, &p, 0.0, &mut stream(1, 1), &SamplingOptions::default(), &mut []).unwrap();
        assert_eq!(traj.samples, vec![before]);
    }

    #[test]
    fn no_infected_gives_constant_trajectory() {
        let (mut s, p) = setup(0.0, 2);
        let traj = simulate(
            &mut s,
            &p,
            10.0,
            &mut stream(2, 1),
            &SamplingOptions::default(),
            &mut [],
        )
        .unwrap();
        assert_eq!(traj.samples.len(), 11);
        assert!(traj.samples.iter().all(|x| (x.s, x.i, x.r) == (500, 0, 0)));
    }

    #[test]
    fn monotone_counts_and_grid() {
        let (mut s, p) = setup(0.02, 3);
        let opts = SamplingOptions {
            dt: 0.5,
            every_event: true,
            ..Default::default()
        };
        let traj = simulate(&mut s, &p, 40.0, &mut stream(3, 1), &opts, &mut []).unwrap();
        for w in traj.samples.windows(2) {
            assert!(w[1].t >= w[0].t);
            assert!(w[1].s <= w[0].s);
            assert!(w[1].r >= w[0].r);
            assert!(w[1].cum_g >= w[0].cum_g && w[1].cum_h >= w[0].cum_h && w[1].cum_w >= w[0].cum_w);
        }
        assert!(traj.samples.iter().all(|x| x.s + x.i + x.r == 500));
        assert_eq!(traj.samples.last().unwrap().t, 40.0);
    }

    #[test]
    fn observers_see_every_event() {
        let (mut s, p) = setup(0.05, 4);
        let mut count = 0usize;
        let mut all_consistent = true;
        let mut obs = |st: &SimulationState, _: &Event| {
            count += 1;
            all_consistent &= st.check_consistency().passed();
        };
        let opts = SamplingOptions {
            event_log: true,
            ..Default::default()
        };
        let traj = simulate(&mut s, &p, 30.0, &mut stream(4, 1), &opts, &mut [&mut obs]).unwrap();
        assert_eq!(count, traj.events.len());
        assert!(all_consistent);
    }

    #[test]
    fn fixed_period_recoveries_are_exact() {
        let (s, _) = setup(0.0, 5);
        let p = EpidemicParams {
            beta_g: 0.4,
            lambda_h: 0.6,
            lambda_w: 0.05,
            period: InfectiousPeriod::Fixed { duration: 3.0 },
        };
        let mut rng = stream(5, 1);
        let mut s = SimulationState::init_uniform_seed(s.graph().clone(), &p, 0.02, &mut rng).unwrap();
        let opts = SamplingOptions {
            event_log: true,
            ..Default::default()
        };
        let traj = simulate(&mut s, &p, 200.0, &mut rng, &opts, &mut []).unwrap();
        let mut infected_at = vec![Some(0.0); 500];
        for e in &traj.events {
            match e.kind {
                crate::engine::EventKind::Infection => infected_at[e.individual as usize] = Some(e.t),
                crate::engine::EventKind::Recovery => {
                    assert_eq!(e.t, infected_at[e.individual as usize].unwrap() + 3.0)
                }
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let (mut s, p) = setup(0.02, 6);
        let opts = SamplingOptions {
            dt: 0.37,
            every_event: true,
            ..Default::default()
        };
        let traj = simulate(&mut s, &p, 15.0, &mut stream(6, 1), &opts, &mut []).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let back = Trajectory::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.samples, traj.samples);
        assert_eq!(back.population, 500);
    }

    #[test]
    fn read_csv_reports_line_numbers() {
        let text = "t,S,I,R,cumG,cumH,cumW\n0,1,0,0,0,0,0\n1,x,0,0,0,0,0\n";
        match Trajectory::read_csv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn histogram_and_event_exports() {
        let (mut s, p) = setup(0.02, 7);
        let opts = SamplingOptions {
            dt: 5.0,
            histograms: true,
            event_log: true,
            ..Default::default()
        };
        let traj = simulate(&mut s, &p, 10.0, &mut stream(7, 1), &opts, &mut []).unwrap();
        let mut buf = Vec::new();
        traj.write_histogram_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,layer,S,I,count\n0,H,"));
        let mut buf = Vec::new();
        traj.write_events(&mut buf).unwrap();
        let first = String::from_utf8(buf).unwrap().lines().next().unwrap().to_string();
        let v: serde_json::Value = serde_json::from_str(&first).unwrap();
        for key in ["t", "kind", "layer", "individual", "household", "workplace"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}
