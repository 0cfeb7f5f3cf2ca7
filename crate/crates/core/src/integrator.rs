//! Adaptive Dormand–Prince 5(4) integration with dense output.
//!
//! Seven-stage embedded pair with the first-same-as-last property, a PI step
//! size controller and the classical fourth-order continuous extension
//! (five interpolation coefficients per step).

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Difference between the fifth- and fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Dense output.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// `None` selects the starting step automatically.
    pub initial_step: Option<f64>,
    /// Disables error control and takes steps of exactly this size (the
    /// last one shortened to land on the end point).
    pub fixed_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 1e-8,
            max_step: f64::INFINITY,
            initial_step: None,
            fixed_step: None,
            max_steps: 1_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidParameter("max_step must be positive".into()));
        }
        if let Some(h) = self.fixed_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidParameter("fixed_step must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Accepted steps of an integration, evaluable anywhere in its time span.
#[derive(Clone, Debug)]
pub struct DenseSolution {
    dim: usize,
    times: Vec<f64>,
    /// `states[k*dim..(k+1)*dim]` is the state at `times[k]`.
    states: Vec<f64>,
    /// Five interpolation coefficients per step, `5*dim` values each.
    coeffs: Vec<f64>,
    pub rhs_evaluations: usize,
    pub rejected_steps: usize,
}

impl DenseSolution {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("at least the initial point")
    }

    /// Step end points, including the initial time.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn state_at_step(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn final_state(&self) -> &[f64] {
        self.state_at_step(self.times.len() - 1)
    }

    /// Index of the step containing `t` and the normalized position in it.
    fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return (0, 0.0);
        }
        if t >= self.times[n - 1] {
            return (n - 2, 1.0);
        }
        let k = self.times.partition_point(|&x| x <= t) - 1;
        let h = self.times[k + 1] - self.times[k];
        (k, (t - self.times[k]) / h)
    }

    fn interpolate(&self, step: usize, theta: f64, component: usize) -> f64 {
        let base = step * 5 * self.dim;
        let r = |j: usize| self.coeffs[base + j * self.dim + component];
        let theta1 = 1.0 - theta;
        r(0) + theta * (r(1) + theta1 * (r(2) + theta * (r(3) + theta1 * r(4))))
    }

    /// One component at time `t` (clamped to the integrated span). Exact at
    /// step end points.
    pub fn component_at(&self, t: f64, component: usize) -> f64 {
        if let Ok(k) = self.times.binary_search_by(|x| x.total_cmp(&t)) {
            return self.state_at_step(k)[component];
        }
        if self.times.len() == 1 {
            return self.states[component];
        }
        let (k, theta) = self.locate(t);
        if theta <= 0.0 {
            return self.state_at_step(k)[component];
        }
        if theta >= 1.0 {
            return self.state_at_step(k + 1)[component];
        }
        self.interpolate(k, theta, component)
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        (0..self.dim).map(|c| self.component_at(t, c)).collect()
    }

    pub fn sample(&self, grid: &[f64]) -> Vec<Vec<f64>> {
        grid.iter().map(|&t| self.at(t)).collect()
    }
}

/// Integrates `y' = f(t, y)` from `t_span.0` to `t_span.1`.
pub fn integrate<F>(mut rhs: F, y0: &[f64], t_span: (f64, f64), config: &IntegratorConfig) -> Result<DenseSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    config.validate()?;
    let (t0, t1) = t_span;
    if !(t0.is_finite() && t1.is_finite() && t1 >= t0) {
        return Err(Error::InvalidParameter(format!("invalid time span [{t0}, {t1}]")));
    }
    let n = y0.len();
    let mut sol = DenseSolution {
        dim: n,
        times: vec![t0],
        states: y0.to_vec(),
        coeffs: Vec::new(),
        rhs_evaluations: 0,
        rejected_steps: 0,
    };
    if t1 == t0 {
        return Ok(sol);
    }

    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    let mut y = y0.to_vec();
    let mut y_stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err_vec = vec![0.0; n];

    rhs(t0, &y, &mut k[0])?;
    sol.rhs_evaluations += 1;

    let span = t1 - t0;
    let mut h = match (config.fixed_step, config.initial_step) {
        (Some(h), _) => h,
        (None, Some(h)) => h,
        (None, None) => initial_step(&mut rhs, t0, &y, &k[0], config, &mut sol.rhs_evaluations)?,
    }
    .min(config.max_step)
    .min(span);

    let beta = 0.04;
    let expo1 = 0.2 - beta * 0.75;
    let safe = 0.9;
    let (fac_min_inv, fac_max_inv) = (1.0 / 0.2, 1.0 / 10.0);
    let mut fac_old: f64 = 1e-4;
    let mut t = t0;
    let mut last_rejected = false;
    let mut steps = 0usize;

    loop {
        if steps >= config.max_steps {
            return Err(Error::StepSizeUnderflow { t, h });
        }
        steps += 1;
        let last = t + h >= t1 || (t1 - (t + h)) <= 1e-12 * span.max(1.0);
        if last {
            h = t1 - t;
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { t, h });
        }

        stage(&mut y_stage, &y, h, &[(A21, &k[0])]);
        rhs(t + C2 * h, &y_stage, &mut k[1])?;
        stage(&mut y_stage, &y, h, &[(A31, &k[0]), (A32, &k[1])]);
        rhs(t + C3 * h, &y_stage, &mut k[2])?;
        stage(&mut y_stage, &y, h, &[(A41, &k[0]), (A42, &k[1]), (A43, &k[2])]);
        rhs(t + C4 * h, &y_stage, &mut k[3])?;
        stage(
            &mut y_stage,
            &y,
            h,
            &[(A51, &k[0]), (A52, &k[1]), (A53, &k[2]), (A54, &k[3])],
        );
        rhs(t + C5 * h, &y_stage, &mut k[4])?;
        stage(
            &mut y_stage,
            &y,
            h,
            &[(A61, &k[0]), (A62, &k[1]), (A63, &k[2]), (A64, &k[3]), (A65, &k[4])],
        );
        rhs(t + h, &y_stage, &mut k[5])?;
        stage(
            &mut y_new,
            &y,
            h,
            &[(A71, &k[0]), (A73, &k[2]), (A74, &k[3]), (A75, &k[4]), (A76, &k[5])],
        );
        let t_new = if last { t1 } else { t + h };
        rhs(t_new, &y_new, &mut k[6])?;
        sol.rhs_evaluations += 6;

        let accept;
        let mut h_next;
        if config.fixed_step.is_some() {
            accept = true;
            h_next = config.fixed_step.unwrap_or(h);
        } else {
            for i in 0..n {
                err_vec[i] =
                    h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            }
            let mut acc = 0.0;
            for i in 0..n {
                let sk = config.abs_tol + config.rel_tol * y[i].abs().max(y_new[i].abs());
                acc += (err_vec[i] / sk).powi(2);
            }
            let err = (acc / n as f64).sqrt();
            if !err.is_finite() {
                sol.rejected_steps += 1;
                h *= 0.1;
                last_rejected = true;
                continue;
            }
            let fac11 = err.powf(expo1);
            if err <= 1.0 {
                let fac = (fac11 / fac_old.powf(beta) / safe).clamp(fac_max_inv, fac_min_inv);
                h_next = h / fac;
                fac_old = err.max(1e-4);
                if last_rejected {
                    h_next = h_next.min(h);
                }
                accept = true;
                last_rejected = false;
            } else {
                h_next = h / (fac11 / safe).min(fac_min_inv);
                accept = false;
                last_rejected = true;
                sol.rejected_steps += 1;
            }
        }

        if accept {
            // Continuous extension coefficients.
            let base = sol.coeffs.len();
            sol.coeffs.resize(base + 5 * n, 0.0);
            let c = &mut sol.coeffs[base..];
            for i in 0..n {
                let ydiff = y_new[i] - y[i];
                let bspl = h * k[0][i] - ydiff;
                c[i] = y[i];
                c[n + i] = ydiff;
                c[2 * n + i] = bspl;
                c[3 * n + i] = ydiff - h * k[6][i] - bspl;
                c[4 * n + i] =
                    h * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
            }
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6);
            sol.times.push(t);
            sol.states.extend_from_slice(&y);
            if last {
                return Ok(sol);
            }
        }
        h = h_next.min(config.max_step);
    }
}

fn stage(out: &mut [f64], y: &[f64], h: f64, terms: &[(f64, &Vec<f64>)]) {
    out.copy_from_slice(y);
    for &(a, k) in terms {
        let ha = h * a;
        for (o, ki) in out.iter_mut().zip(k.iter()) {
            *o += ha * ki;
        }
    }
}

/// Starting step heuristic (Hairer, Nørsett & Wanner).
fn initial_step<F>(
    rhs: &mut F,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    config: &IntegratorConfig,
    evals: &mut usize,
) -> Result<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y0.len().max(1) as f64;
    let sk = |i: usize| config.abs_tol + config.rel_tol * y0[i].abs();
    let dnf = (0..y0.len()).map(|i| (f0[i] / sk(i)).powi(2)).sum::<f64>() / n;
    let dny = (0..y0.len()).map(|i| (y0[i] / sk(i)).powi(2)).sum::<f64>() / n;
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        (dny / dnf).sqrt() * 0.01
    };
    h = h.min(config.max_step);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h * f).collect();
    let mut f1 = vec![0.0; y0.len()];
    rhs(t0 + h, &y1, &mut f1)?;
    *evals += 1;
    let der2 = ((0..y0.len()).map(|i| ((f1[i] - f0[i]) / sk(i)).powi(2)).sum::<f64>() / n).sqrt() / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(1.0 / 5.0)
    };
    Ok((100.0 * h).min(h1).min(config.max_step))
}

/// First time after the global maximum of `component` at which it falls
/// through `level`, located by bisection on the dense output to `1e-9`.
pub fn find_threshold_time(solution: &DenseSolution, component: usize, level: f64) -> Option<f64> {
    let times = solution.times();
    let value = |k: usize| solution.state_at_step(k)[component];
    let peak = (0..times.len()).max_by(|&a, &b| value(a).total_cmp(&value(b)))?;
    if value(peak) < level {
        return None;
    }
    let k = (peak..times.len() - 1).find(|&k| value(k) >= level && value(k + 1) < level)?;
    let (mut lo, mut hi) = (times[k], times[k + 1]);
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if solution.component_at(mid, component) >= level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}
