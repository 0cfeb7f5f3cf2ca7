//! Closed large-population ODE system over structure compositions.
//!
//! The state holds the susceptible and infected proportions `s`, `i` and,
//! for each layer, the proportion `n^X_{S,I}` of structures holding `S`
//! susceptibles and `I` infected, for every `(S, I)` with `S >= 1` and
//! `2 <= S + I <= n_max_X`. The right-hand side is assembled from the index
//! map, never written out equation by equation.

use std::io::Write;

use crate::engine::TypeHistogram;
use crate::error::{Error, Result};
use crate::graph::Layer;
use crate::integrator::{find_threshold_time, integrate, DenseSolution, IntegratorConfig};
use crate::size_dist::SizeDistribution;

/// Below this susceptible proportion the cross-layer flux is switched off.
pub const S_FLOOR: f64 = 1e-12;

/// Enumerates `(n − i, i)` for `2 <= n <= n_max`, `0 <= i <= n − 1` per
/// layer, by increasing `n` then increasing `i`. Layout of the flat state:
/// `[s, i, household block, workplace block]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateIndexer {
    n_max: [usize; 2],
}

impl StateIndexer {
    pub fn new(n_max_h: usize, n_max_w: usize) -> Self {
        Self {
            n_max: [n_max_h, n_max_w],
        }
    }

    pub fn n_max(&self, layer: Layer) -> usize {
        self.n_max[lidx(layer)]
    }

    /// Number of compositions tracked for `layer`: `n_max(n_max+1)/2 − 1`.
    pub fn block_len(&self, layer: Layer) -> usize {
        let n = self.n_max(layer);
        if n < 2 {
            0
        } else {
            n * (n + 1) / 2 - 1
        }
    }

    pub fn block_offset(&self, layer: Layer) -> usize {
        match layer {
            Layer::Household => 2,
            Layer::Workplace => 2 + self.block_len(Layer::Household),
        }
    }

    pub fn dim(&self) -> usize {
        2 + self.block_len(Layer::Household) + self.block_len(Layer::Workplace)
    }

    /// 1-based rank `c(S, I) = (n−1)n/2 + I` of a composition within its
    /// layer block, `n = S + I`.
    pub fn rank(s: usize, i: usize) -> usize {
        let n = s + i;
        (n - 1) * n / 2 + i
    }

    /// Flat index of `n^X_{S,I}`, if tracked.
    pub fn index(&self, layer: Layer, s: usize, i: usize) -> Option<usize> {
        let n = s + i;
        (s >= 1 && n >= 2 && n <= self.n_max(layer)).then(|| self.block_offset(layer) + Self::rank(s, i) - 1)
    }

    /// Compositions of `layer` in storage order.
    pub fn compositions(&self, layer: Layer) -> impl Iterator<Item = (usize, usize)> {
        let n_max = self.n_max(layer);
        (2..=n_max).flat_map(|n| (0..n).map(move |i| (n - i, i)))
    }

    /// Column name of a flat index: `s`, `i`, `nH_S_I` or `nW_S_I`.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = vec!["s".to_string(), "i".to_string()];
        for layer in Layer::BOTH {
            for (s, i) in self.compositions(layer) {
                names.push(format!("n{}_{}_{}", layer.tag(), s, i));
            }
        }
        names
    }
}

fn lidx(layer: Layer) -> usize {
    match layer {
        Layer::Household => 0,
        Layer::Workplace => 1,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedParams {
    pub beta_g: f64,
    pub lambda_h: f64,
    pub lambda_w: f64,
    pub gamma: f64,
    pub households: SizeDistribution,
    pub workplaces: SizeDistribution,
}

impl ReducedParams {
    pub fn lambda(&self, layer: Layer) -> f64 {
        match layer {
            Layer::Household => self.lambda_h,
            Layer::Workplace => self.lambda_w,
        }
    }

    pub fn dist(&self, layer: Layer) -> &SizeDistribution {
        match layer {
            Layer::Household => &self.households,
            Layer::Workplace => &self.workplaces,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("beta_g", self.beta_g),
            ("lambda_h", self.lambda_h),
            ("lambda_w", self.lambda_w),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidParameter("gamma must be > 0".into()));
        }
        Ok(())
    }

    /// Same system with the two layers relabelled.
    pub fn swapped(&self) -> Self {
        Self {
            lambda_h: self.lambda_w,
            lambda_w: self.lambda_h,
            households: self.workplaces.clone(),
            workplaces: self.households.clone(),
            ..self.clone()
        }
    }
}

/// Precomputed neighbour table of one layer block.
#[derive(Clone, Debug)]
struct Block {
    offset: usize,
    lambda: f64,
    mean: f64,
    susceptible: Vec<f64>,
    infected: Vec<f64>,
    /// Local index of `(S, I + 1)`, present when `S + I < n_max`.
    recovery_source: Vec<Option<usize>>,
    /// Local index of `(S + 1, I − 1)`, present when `I >= 1`.
    infection_source: Vec<Option<usize>>,
    /// Local index of `(1, 1)`.
    one_one: Option<usize>,
}

impl Block {
    fn new(indexer: &StateIndexer, layer: Layer, params: &ReducedParams) -> Self {
        let offset = indexer.block_offset(layer);
        let n_max = indexer.n_max(layer);
        let local = |s, i| indexer.index(layer, s, i).map(|g| g - offset);
        let comps: Vec<(usize, usize)> = indexer.compositions(layer).collect();
        Self {
            offset,
            lambda: params.lambda(layer),
            mean: params.dist(layer).mean(),
            susceptible: comps.iter().map(|&(s, _)| s as f64).collect(),
            infected: comps.iter().map(|&(_, i)| i as f64).collect(),
            recovery_source: comps
                .iter()
                .map(|&(s, i)| if s + i < n_max { local(s, i + 1) } else { None })
                .collect(),
            infection_source: comps
                .iter()
                .map(|&(s, i)| if i >= 1 { local(s + 1, i - 1) } else { None })
                .collect(),
            one_one: local(1, 1),
        }
    }

    fn slice<'a>(&self, y: &'a [f64]) -> &'a [f64] {
        &y[self.offset..self.offset + self.susceptible.len()]
    }

    /// `τ_X = λ_X / m_X Σ S I n^X_{S,I}`.
    fn tau(&self, y: &[f64]) -> f64 {
        let n = self.slice(y);
        let sum: f64 = (0..n.len())
            .map(|k| self.susceptible[k] * self.infected[k] * n[k])
            .sum();
        self.lambda / self.mean * sum
    }
}

/// The reduced system for one parameter set.
#[derive(Clone, Debug)]
pub struct ReducedModel {
    params: ReducedParams,
    indexer: StateIndexer,
    blocks: [Block; 2],
}

/// Named pieces of the right-hand side at one state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fluxes {
    pub tau_g: f64,
    pub tau_h: f64,
    pub tau_w: f64,
}

impl Fluxes {
    pub fn tau(&self, layer: Layer) -> f64 {
        match layer {
            Layer::Household => self.tau_h,
            Layer::Workplace => self.tau_w,
        }
    }
}

impl ReducedModel {
    pub fn new(params: ReducedParams) -> Result<Self> {
        params.validate()?;
        let indexer = StateIndexer::new(params.households.n_max(), params.workplaces.n_max());
        let blocks = [
            Block::new(&indexer, Layer::Household, &params),
            Block::new(&indexer, Layer::Workplace, &params),
        ];
        Ok(Self {
            params,
            indexer,
            blocks,
        })
    }

    pub fn params(&self) -> &ReducedParams {
        &self.params
    }

    pub fn indexer(&self) -> &StateIndexer {
        &self.indexer
    }

    pub fn dim(&self) -> usize {
        self.indexer.dim()
    }

    fn block(&self, layer: Layer) -> &Block {
        &self.blocks[lidx(layer)]
    }

    pub fn fluxes(&self, y: &[f64]) -> Fluxes {
        Fluxes {
            tau_g: self.params.beta_g * y[1],
            tau_h: self.blocks[0].tau(y),
            tau_w: self.blocks[1].tau(y),
        }
    }

    /// Initial state with a fraction `epsilon` of uniformly chosen
    /// individuals infected: `n^X_{S,I}(0) = C(S+I, I) π^X_{S+I} (1−ε)^S ε^I`.
    pub fn initial_condition(&self, epsilon: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidParameter(format!(
                "initial infected fraction must lie in [0, 1], got {epsilon}"
            )));
        }
        let mut y = vec![0.0; self.dim()];
        y[0] = 1.0 - epsilon;
        y[1] = epsilon;
        for layer in Layer::BOTH {
            let dist = self.params.dist(layer);
            for (s, i) in self.indexer.compositions(layer) {
                let idx = self.indexer.index(layer, s, i).expect("enumerated");
                y[idx] =
                    binomial(s + i, i) * dist.prob(s + i) * (1.0 - epsilon).powi(s as i32) * epsilon.powi(i as i32);
            }
        }
        Ok(y)
    }

    /// Initial state read off an observed (possibly replicate-averaged)
    /// structure histogram: `n^X_{S,I} = count / K_X`, `s = S/K`, `i = I/K`.
    pub fn initial_condition_from_counts(&self, hist: &TypeHistogram) -> Result<Vec<f64>> {
        let k = hist.population;
        if !(k > 0.0) {
            return Err(Error::InconsistentHistogram("empty population".into()));
        }
        let tol = 1e-9 * k.max(1.0);
        let mut y = vec![0.0; self.dim()];
        y[0] = hist.susceptible / k;
        y[1] = hist.infected / k;
        for layer in Layer::BOTH {
            let kx = hist.structure_count(layer);
            if !(kx > 0.0) {
                return Err(Error::InconsistentHistogram(format!("no {} structures", layer.tag())));
            }
            let (mut sum_s, mut sum_i) = (0.0, 0.0);
            for (&(s, i), &count) in hist.layer(layer) {
                sum_s += s as f64 * count;
                sum_i += i as f64 * count;
                if s == 0 || s + i < 2 || count == 0.0 {
                    continue;
                }
                let idx = self.indexer.index(layer, s, i).ok_or_else(|| {
                    Error::InconsistentHistogram(format!(
                        "{} composition ({s}, {i}) exceeds n_max = {}",
                        layer.tag(),
                        self.indexer.n_max(layer)
                    ))
                })?;
                y[idx] = count / kx;
            }
            if (sum_s - hist.susceptible).abs() > tol || (sum_i - hist.infected).abs() > tol {
                return Err(Error::InconsistentHistogram(format!(
                    "{} layer holds (S, I) = ({sum_s}, {sum_i}), population totals are ({}, {})",
                    layer.tag(),
                    hist.susceptible,
                    hist.infected
                )));
            }
        }
        Ok(y)
    }

    /// Evaluates the vector field into `dy`.
    pub fn rhs(&self, y: &[f64], dy: &mut [f64]) -> Result<()> {
        debug_assert_eq!(y.len(), self.dim());
        let s = y[0];
        let i = y[1];
        let gamma = self.params.gamma;
        let fl = self.fluxes(y);
        if s <= 0.0 {
            for layer in Layer::BOTH {
                let b = self.block(layer);
                if b.slice(y).iter().any(|&n| n > 1e-10) {
                    return Err(Error::DegenerateState(format!(
                        "s = {s} while {} structures still hold susceptibles",
                        layer.tag()
                    )));
                }
            }
        }
        let ds = -(fl.tau_h + fl.tau_w + fl.tau_g * s);
        dy[0] = ds;
        dy[1] = -ds - gamma * i;
        for layer in Layer::BOTH {
            let b = self.block(layer);
            let cross = fl.tau(layer.other());
            let n = b.slice(y);
            // Cross-layer pressure τ_X̄ · (S n / s), ratio clamped to [0, m_X].
            let cross_term = |sus: f64, val: f64| -> f64 {
                if s < S_FLOOR {
                    0.0
                } else {
                    cross * (sus * val / s).clamp(0.0, b.mean)
                }
            };
            let out = &mut dy[b.offset..b.offset + n.len()];
            for k in 0..n.len() {
                let (sk, ik) = (b.susceptible[k], b.infected[k]);
                let mut d =
                    -(b.lambda * sk * ik * n[k] + cross_term(sk, n[k]) + fl.tau_g * sk * n[k] + gamma * ik * n[k]);
                if let Some(src) = b.recovery_source[k] {
                    d += gamma * (ik + 1.0) * n[src];
                }
                if let Some(src) = b.infection_source[k] {
                    let (ss, is) = (b.susceptible[src], b.infected[src]);
                    d += b.lambda * ss * is * n[src] + cross_term(ss, n[src]) + fl.tau_g * ss * n[src];
                }
                out[k] = d;
            }
        }
        Ok(())
    }

    pub fn rhs_vec(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut dy = vec![0.0; y.len()];
        self.rhs(y, &mut dy)?;
        Ok(dy)
    }

    /// `Δ_X = m_X s − Σ S n^X_{S,I}`.
    pub fn delta(&self, y: &[f64], layer: Layer) -> f64 {
        let b = self.block(layer);
        let n = b.slice(y);
        b.mean * y[0] - (0..n.len()).map(|k| b.susceptible[k] * n[k]).sum::<f64>()
    }

    /// `Σ_{(S,I)} n^X_{S,I}`.
    pub fn structure_mass(&self, y: &[f64], layer: Layer) -> f64 {
        self.block(layer).slice(y).iter().sum()
    }

    pub fn n_one_one(&self, y: &[f64], layer: Layer) -> f64 {
        let b = self.block(layer);
        b.one_one.map_or(0.0, |k| b.slice(y)[k])
    }

    /// Derivative of `Δ_X` computed from the vector field, minus the closed
    /// form `γ n^X_{1,1} − (τ_G + τ_X̄ / s) Δ_X`.
    pub fn delta_identity_residual(&self, y: &[f64], layer: Layer) -> Result<f64> {
        let dy = self.rhs_vec(y)?;
        let b = self.block(layer);
        let dn = b.slice(&dy);
        let d_delta = b.mean * dy[0] - (0..dn.len()).map(|k| b.susceptible[k] * dn[k]).sum::<f64>();
        let fl = self.fluxes(y);
        let closed = self.params.gamma * self.n_one_one(y, layer)
            - (fl.tau_g + fl.tau(layer.other()) / y[0]) * self.delta(y, layer);
        Ok(d_delta - closed)
    }

    /// Rate at which structures leave the tracked set through the infection
    /// of their last susceptible member: `Σ_I (λ_X I + τ_X̄/s + τ_G) n^X_{1,I}`.
    pub fn last_susceptible_outflow(&self, y: &[f64], layer: Layer) -> f64 {
        let fl = self.fluxes(y);
        let b = self.block(layer);
        let n = b.slice(y);
        let per_susceptible = if y[0] < S_FLOOR {
            0.0
        } else {
            fl.tau(layer.other()) / y[0]
        };
        (0..n.len())
            .filter(|&k| b.susceptible[k] == 1.0)
            .map(|k| (b.lambda * b.infected[k] + per_susceptible + fl.tau_g) * n[k])
            .sum()
    }

    /// Evaluates the confinement set constraints.
    pub fn check_v(&self, y: &[f64], tol: f64) -> VReport {
        let mut checks = Vec::new();
        let names = self.indexer.column_names();
        let worst_box = y
            .iter()
            .enumerate()
            .map(|(k, &v)| (k, (-v).max(v - 1.0)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((0, f64::NEG_INFINITY));
        checks.push(VCheck::new(
            format!("entries in [0, 1] (worst {})", names[worst_box.0]),
            worst_box.1,
            tol,
        ));
        checks.push(VCheck::new("s + i <= 1".into(), y[0] + y[1] - 1.0, tol));
        for layer in Layer::BOTH {
            checks.push(VCheck::new(
                format!("sum n{} <= 1", layer.tag()),
                self.structure_mass(y, layer) - 1.0,
                tol,
            ));
            checks.push(VCheck::new(
                format!("m_{0} s - sum S n{0} >= 0", layer.tag()),
                -self.delta(y, layer),
                tol,
            ));
        }
        VReport { checks }
    }

    /// Integrates from `y0` over `[0, t_end]`, carrying the removed
    /// proportion `r` (with `r(0) = 1 − s(0) − i(0)`) as an extra last
    /// coordinate.
    pub fn solve(&self, y0: &[f64], t_end: f64, config: &IntegratorConfig) -> Result<ReducedSolution> {
        if y0.len() != self.dim() {
            return Err(Error::InvalidParameter(format!(
                "state has {} entries, expected {}",
                y0.len(),
                self.dim()
            )));
        }
        let d = self.dim();
        let mut aug = y0.to_vec();
        aug.push(1.0 - y0[0] - y0[1]);
        let gamma = self.params.gamma;
        let dense = integrate(
            |_, y: &[f64], dy: &mut [f64]| {
                self.rhs(&y[..d], &mut dy[..d])?;
                dy[d] = gamma * y[1];
                Ok(())
            },
            &aug,
            (0.0, t_end),
            config,
        )?;
        Ok(ReducedSolution {
            dense,
            indexer: self.indexer.clone(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VCheck {
    pub name: String,
    /// Amount by which the constraint is violated (negative when slack).
    pub violation: f64,
    pub passed: bool,
}

impl VCheck {
    fn new(name: String, violation: f64, tol: f64) -> Self {
        Self {
            name,
            violation,
            passed: violation <= tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VReport {
    pub checks: Vec<VCheck>,
}

impl VReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &VCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Dense solution of the reduced system with the removed proportion
/// appended as the last coordinate.
#[derive(Clone, Debug)]
pub struct ReducedSolution {
    pub dense: DenseSolution,
    indexer: StateIndexer,
}

impl ReducedSolution {
    pub fn indexer(&self) -> &StateIndexer {
        &self.indexer
    }

    pub fn t_end(&self) -> f64 {
        self.dense.t_end()
    }

    pub fn s(&self, t: f64) -> f64 {
        self.dense.component_at(t, 0)
    }

    pub fn i(&self, t: f64) -> f64 {
        self.dense.component_at(t, 1)
    }

    pub fn r(&self, t: f64) -> f64 {
        self.dense.component_at(t, self.indexer.dim())
    }

    /// Model state (without `r`) at `t`.
    pub fn state(&self, t: f64) -> Vec<f64> {
        let mut y = self.dense.at(t);
        y.pop();
        y
    }

    /// Post-peak time at which `i` falls below `level`.
    pub fn threshold_time(&self, level: f64) -> Option<f64> {
        find_threshold_time(&self.dense, 1, level)
    }

    /// CSV `t,s,i,r` on `grid`, optionally followed by every `nX_S_I` column.
    pub fn write_csv<W: Write>(&self, mut out: W, grid: &[f64], full_state: bool) -> Result<()> {
        let mut header = vec!["t".to_string(), "s".into(), "i".into(), "r".into()];
        if full_state {
            header.extend(self.indexer.column_names().into_iter().skip(2));
        }
        writeln!(out, "{}", header.join(","))?;
        for &t in grid {
            let y = self.dense.at(t);
            let d = self.indexer.dim();
            let mut row = vec![t.to_string(), y[0].to_string(), y[1].to_string(), y[d].to_string()];
            if full_state {
                row.extend(y[2..d].iter().map(f64::to_string));
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}
