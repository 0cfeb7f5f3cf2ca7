//! Curves of `(s, i)` proportions and the statistics used to compare them.

use std::io::Write;

use crate::engine::{Channel, Trajectory};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    S,
    I,
}

/// Susceptible and infected proportions sampled at nondecreasing times,
/// linearly interpolated in between.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Curve {
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    pub i: Vec<f64>,
}

impl Curve {
    pub fn new(t: Vec<f64>, s: Vec<f64>, i: Vec<f64>) -> Result<Self> {
        if t.len() != s.len() || t.len() != i.len() {
            return Err(Error::InvalidParameter("curve columns differ in length".into()));
        }
        if t.is_empty() {
            return Err(Error::InvalidParameter("empty curve".into()));
        }
        if t.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::InvalidParameter("curve times must be nondecreasing".into()));
        }
        Ok(Self { t, s, i })
    }

    pub fn from_trajectory(traj: &Trajectory) -> Self {
        let k = traj.population.max(1) as f64;
        Self {
            t: traj.samples.iter().map(|x| x.t).collect(),
            s: traj.samples.iter().map(|x| x.s as f64 / k).collect(),
            i: traj.samples.iter().map(|x| x.i as f64 / k).collect(),
        }
    }

    /// Samples `f(t) = (s, i)` on `grid`.
    pub fn from_fn(grid: &[f64], f: impl Fn(f64) -> (f64, f64)) -> Self {
        let (s, i) = grid.iter().map(|&t| f(t)).unzip();
        Self { t: grid.to_vec(), s, i }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.t[0]
    }

    pub fn end(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    pub fn values(&self, component: Component) -> &[f64] {
        match component {
            Component::S => &self.s,
            Component::I => &self.i,
        }
    }

    /// Linear interpolation; `None` outside the sampled range.
    pub fn value_at(&self, component: Component, t: f64) -> Option<f64> {
        let v = self.values(component);
        let j = self.t.partition_point(|&u| u <= t);
        if j == 0 {
            return None;
        }
        if j == self.t.len() {
            return (t == self.end()).then(|| v[j - 1]);
        }
        let (t0, t1) = (self.t[j - 1], self.t[j]);
        let w = (t - t0) / (t1 - t0);
        Some(v[j - 1] + w * (v[j] - v[j - 1]))
    }

    pub fn shifted(&self, dt: f64) -> Self {
        Self {
            t: self.t.iter().map(|t| t + dt).collect(),
            ..self.clone()
        }
    }

    /// Time and value of the (first) maximum of `i`.
    pub fn peak(&self) -> (f64, f64) {
        let mut best = 0;
        for k in 1..self.len() {
            if self.i[k] > self.i[best] {
                best = k;
            }
        }
        (self.t[best], self.i[best])
    }

    /// First time `i` reaches `level`, linearly interpolated.
    pub fn first_up_crossing(&self, level: f64) -> Option<f64> {
        let k = self.i.iter().position(|&v| v >= level)?;
        if k == 0 {
            return Some(self.t[0]);
        }
        let (a, b) = (self.i[k - 1], self.i[k]);
        let (t0, t1) = (self.t[k - 1], self.t[k]);
        if b == level {
            return Some(t1);
        }
        Some(t0 + (level - a) / (b - a) * (t1 - t0))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,s,i")?;
        for k in 0..self.len() {
            writeln!(out, "{},{},{}", self.t[k], self.s[k], self.i[k])?;
        }
        Ok(())
    }
}

/// Keeps the curves whose `i` reaches `level` and shifts each so that its
/// first up-crossing sits at `t = 0`. The crossing point itself is inserted,
/// so aligning twice is a no-op.
pub fn align_by_threshold(curves: &[Curve], level: f64) -> Result<Vec<Curve>> {
    let aligned: Vec<Curve> = curves
        .iter()
        .filter_map(|c| {
            let tc = c.first_up_crossing(level)?;
            let k = c.i.iter().position(|&v| v >= level)?;
            let mut out = c.shifted(-tc);
            if out.t[k] != 0.0 {
                let s = c.value_at(Component::S, tc).unwrap_or(c.s[k]);
                out.t.insert(k, 0.0);
                out.s.insert(k, s);
                out.i.insert(k, level);
            }
            Some(out)
        })
        .collect();
    if aligned.is_empty() {
        return Err(Error::EmptySelection);
    }
    Ok(aligned)
}

/// Pointwise ensemble mean with standard errors. At each grid point only the
/// curves covering it contribute; `count` records how many did.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleMean {
    pub t: Vec<f64>,
    pub s_mean: Vec<f64>,
    pub s_stderr: Vec<f64>,
    pub i_mean: Vec<f64>,
    pub i_stderr: Vec<f64>,
    pub count: Vec<usize>,
}

impl EnsembleMean {
    /// Mean curve over the grid points covered by at least one member.
    pub fn curve(&self) -> Curve {
        let keep: Vec<usize> = (0..self.t.len()).filter(|&k| self.count[k] > 0).collect();
        Curve {
            t: keep.iter().map(|&k| self.t[k]).collect(),
            s: keep.iter().map(|&k| self.s_mean[k]).collect(),
            i: keep.iter().map(|&k| self.i_mean[k]).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,s_mean,s_stderr,i_mean,i_stderr,count")?;
        for k in 0..self.t.len() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                self.t[k], self.s_mean[k], self.s_stderr[k], self.i_mean[k], self.i_stderr[k], self.count[k]
            )?;
        }
        Ok(())
    }
}

pub fn ensemble_mean(curves: &[Curve], grid: &[f64]) -> Result<EnsembleMean> {
    if curves.len() < 2 {
        return Err(Error::InsufficientSamples {
            got: curves.len(),
            need: 2,
        });
    }
    let mut out = EnsembleMean {
        t: grid.to_vec(),
        s_mean: Vec::with_capacity(grid.len()),
        s_stderr: Vec::with_capacity(grid.len()),
        i_mean: Vec::with_capacity(grid.len()),
        i_stderr: Vec::with_capacity(grid.len()),
        count: Vec::with_capacity(grid.len()),
    };
    for &t in grid {
        let mut s_vals = Vec::with_capacity(curves.len());
        let mut i_vals = Vec::with_capacity(curves.len());
        for c in curves {
            if let (Some(s), Some(i)) = (c.value_at(Component::S, t), c.value_at(Component::I, t)) {
                s_vals.push(s);
                i_vals.push(i);
            }
        }
        let (sm, se) = mean_stderr(&s_vals);
        let (im, ie) = mean_stderr(&i_vals);
        out.s_mean.push(sm);
        out.s_stderr.push(se);
        out.i_mean.push(im);
        out.i_stderr.push(ie);
        out.count.push(s_vals.len());
    }
    Ok(out)
}

/// Sample mean and standard error of the mean (zero for fewer than two
/// values, NaN mean for none).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Supremum of `|a − b|` over the overlap of the two curves. Both are
/// piecewise linear, so it is attained at a sample time of one of them.
pub fn sup_distance(a: &Curve, b: &Curve, component: Component) -> Result<f64> {
    let lo = a.start().max(b.start());
    let hi = a.end().min(b.end());
    if lo > hi {
        return Err(Error::InvalidParameter("curves do not overlap in time".into()));
    }
    let mut sup: f64 = 0.0;
    let points =
        a.t.iter()
            .chain(&b.t)
            .copied()
            .filter(|&t| t >= lo && t <= hi)
            .chain([lo, hi]);
    for t in points {
        let (Some(x), Some(y)) = (a.value_at(component, t), b.value_at(component, t)) else {
            continue;
        };
        sup = sup.max((x - y).abs());
    }
    Ok(sup)
}

/// Final share of infections per channel, ordered global, household,
/// workplace. All zero when nobody was infected through a channel.
pub fn layer_proportions(traj: &Trajectory) -> [f64; 3] {
    let Some(last) = traj.samples.last() else {
        return [0.0; 3];
    };
    proportions([last.cum_g, last.cum_h, last.cum_w])
}

/// Same as [`layer_proportions`] from an event log.
pub fn layer_proportions_from_events(traj: &Trajectory) -> [f64; 3] {
    let mut counts = [0u64; 3];
    for e in &traj.events {
        if let Some(ch) = e.layer {
            let k = Channel::ALL.iter().position(|&c| c == ch).expect("known channel");
            counts[k] += 1;
        }
    }
    proportions(counts)
}

fn proportions(counts: [u64; 3]) -> [f64; 3] {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return [0.0; 3];
    }
    counts.map(|c| c as f64 / total as f64)
}

/// Ensemble mean of a quantity with a normal-approximation 95% interval.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
}

impl Estimate {
    pub fn of(values: &[f64]) -> Self {
        let (mean, se) = mean_stderr(values);
        Self {
            mean,
            half_width: 1.96 * se,
        }
    }
}

/// Per-channel proportions over an ensemble, replicates without any
/// transmission left out.
pub fn layer_proportion_estimates(trajs: &[Trajectory]) -> [Estimate; 3] {
    let props: Vec<[f64; 3]> = trajs
        .iter()
        .map(layer_proportions)
        .filter(|p| p.iter().sum::<f64>() > 0.0)
        .collect();
    [0, 1, 2].map(|k| Estimate::of(&props.iter().map(|p| p[k]).collect::<Vec<_>>()))
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub samples: usize,
}

/// One-sample Kolmogorov–Smirnov test of the pooled remaining infectious
/// periods against the exponential law of rate `gamma`.
pub fn memorylessness_test(samples: &[f64], gamma: f64) -> Result<KsResult> {
    const MIN_SAMPLES: usize = 500;
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            got: samples.len(),
            need: MIN_SAMPLES,
        });
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter("gamma must be > 0".into()));
    }
    Ok(ks_test(
        samples,
        |x| if x <= 0.0 { 0.0 } else { -(-gamma * x).exp_m1() },
    ))
}

/// One-sample KS statistic and its asymptotic p-value.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (k, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - k as f64 / n).max((k + 1) as f64 / n - f);
    }
    KsResult {
        statistic: d,
        p_value: kolmogorov_p_value(xs.len(), d),
        samples: xs.len(),
    }
}

/// `P(D_n > d)` from the Kolmogorov limit law with Stephens' finite-sample
/// correction.
pub fn kolmogorov_p_value(n: usize, d: f64) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Sample;

    fn constant(v: f64, t_end: f64) -> Curve {
        Curve::new(vec![0.0, t_end], vec![1.0 - v; 2], vec![v; 2]).unwrap()
    }

    #[test]
    fn interpolation() {
        let c = Curve::new(vec![0.0, 1.0, 3.0], vec![1.0, 0.5, 0.5], vec![0.0, 0.2, 0.0]).unwrap();
        assert_eq!(c.value_at(Component::I, 0.5), Some(0.1));
        assert_eq!(c.value_at(Component::I, 2.0), Some(0.1));
        assert_eq!(c.value_at(Component::I, 3.0), Some(0.0));
        assert_eq!(c.value_at(Component::I, 3.5), None);
        assert_eq!(c.value_at(Component::I, -0.1), None);
        assert_eq!(c.peak(), (1.0, 0.2));
        assert!(Curve::new(vec![1.0, 0.0], vec![0.0; 2], vec![0.0; 2]).is_err());
    }

    #[test]
    fn alignment_examples() {
        let c = Curve::new(vec![0.0, 1.0, 2.0], vec![0.99, 0.9, 0.8], vec![0.01, 0.05, 0.1]).unwrap();
        let a = align_by_threshold(std::slice::from_ref(&c), 0.01).unwrap();
        assert_eq!(a[0], c);

        let c = Curve::new(vec![0.0, 2.0, 4.0], vec![1.0, 0.9, 0.8], vec![0.0, 0.02, 0.1]).unwrap();
        let a = align_by_threshold(&[c.clone(), constant(0.0, 4.0)], 0.01).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].t, vec![-1.0, 0.0, 1.0, 3.0]);
        assert_eq!(a[0].i[1], 0.01);
        let again = align_by_threshold(&a, 0.01).unwrap();
        assert_eq!(again, a);

        assert!(matches!(
            align_by_threshold(&[constant(0.0, 5.0)], 0.005),
            Err(Error::EmptySelection)
        ));
    }

    #[test]
    fn ensemble_mean_examples() {
        let a = constant(0.0, 10.0);
        let b = constant(1.0, 10.0);
        let grid: Vec<f64> = (0..=10).map(f64::from).collect();
        let m = ensemble_mean(&[a.clone(), b], &grid).unwrap();
        assert!(m.i_mean.iter().all(|&v| v == 0.5));
        let m = ensemble_mean(&[a.clone(), a.clone()], &grid).unwrap();
        assert!(m.i_stderr.iter().all(|&v| v == 0.0));
        assert_eq!(m.curve(), Curve::from_fn(&grid, |_| (1.0, 0.0)));
        assert!(matches!(
            ensemble_mean(&[a], &grid),
            Err(Error::InsufficientSamples { got: 1, need: 2 })
        ));
    }

    #[test]
    fn sup_distance_examples() {
        let a = constant(0.0, 10.0);
        assert_eq!(sup_distance(&a, &a, Component::I).unwrap(), 0.0);
        assert!((sup_distance(&a, &constant(0.3, 10.0), Component::I).unwrap() - 0.3).abs() < 1e-15);
        let tri = Curve::new(vec![0.0, 5.0, 10.0], vec![1.0; 3], vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(sup_distance(&a, &tri, Component::I).unwrap(), 1.0);
        assert!(sup_distance(&a, &constant(0.0, 10.0).shifted(20.0), Component::I).is_err());
    }

    fn traj(cum: [u64; 3]) -> Trajectory {
        Trajectory {
            population: 10,
            samples: vec![Sample {
                t: 1.0,
                s: 0,
                i: 0,
                r: 10,
                cum_g: cum[0],
                cum_h: cum[1],
                cum_w: cum[2],
            }],
            ..Default::default()
        }
    }

    #[test]
    fn proportions() {
        assert_eq!(layer_proportions(&traj([4, 0, 0])), [1.0, 0.0, 0.0]);
        assert_eq!(layer_proportions(&traj([0, 0, 0])), [0.0; 3]);
        assert_eq!(layer_proportions(&traj([1, 2, 1])), [0.25, 0.5, 0.25]);
        let est = layer_proportion_estimates(&[traj([1, 1, 0]), traj([0, 1, 1]), traj([0, 0, 0])]);
        assert_eq!(est[1].mean, 0.5);
        assert_eq!(est[1].half_width, 0.0);
    }

    #[test]
    fn kolmogorov_tail() {
        // Reference values of the limiting distribution Q(λ).
        let q = |lambda: f64| {
            let n = 1_000_000_000usize;
            kolmogorov_p_value(n, lambda / (n as f64).sqrt())
        };
        assert!((q(1.36) - 0.0494).abs() < 5e-4);
        assert!((q(1.63) - 0.0098).abs() < 5e-4);
        assert_eq!(q(0.1), 1.0);
    }

    #[test]
    fn ks_requires_samples() {
        assert!(matches!(
            memorylessness_test(&[1.0; 499], 0.125),
            Err(Error::InsufficientSamples { got: 499, need: 500 })
        ));
    }
}
