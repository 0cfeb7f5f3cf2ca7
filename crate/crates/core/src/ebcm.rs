//! Edge-based compartmental model for the clique configuration model.
//!
//! State layout: `[i, θ^G, θ^H_1..θ^H_{n_max_H}, θ^W_1..θ^W_{n_max_W},
//! household triples, workplace triples]`. Triples `(S, I, R)` are stored
//! for every size `n = 1..n_max`, size-major, then by `I`, then by `R`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::graph::Layer;
use crate::integrator::{find_threshold_time, integrate, DenseSolution, IntegratorConfig};
use crate::reduced::ReducedParams;

/// Below this value of `m^X_n` the external pressure on that size is zero.
pub const M_FLOOR: f64 = 1e-14;

/// Variants of the balance equations for the triple proportions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BalanceForm {
    /// Infection gain into `(S, I, R)` for `I >= 1`, so that structures
    /// infected from outside enter the within-structure dynamics, and a
    /// global flux `β_G s i` shared among sizes, giving the per-susceptible
    /// pressure `β_G i + Σ_k T^X̄_k / s`.
    #[default]
    Corrected,
    /// Gain only for `I > 1` and global flux `β_G i`, exactly as the
    /// equations are usually quoted. External infections then never seed
    /// new within-structure outbreaks.
    Printed,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TripleIndexer {
    n_max: [usize; 2],
}

impl TripleIndexer {
    pub fn new(n_max_h: usize, n_max_w: usize) -> Self {
        Self {
            n_max: [n_max_h, n_max_w],
        }
    }

    pub fn n_max(&self, layer: Layer) -> usize {
        self.n_max[lidx(layer)]
    }

    /// Number of triples of size `n`.
    pub fn per_size(n: usize) -> usize {
        (n + 1) * (n + 2) / 2
    }

    pub fn block_len(&self, layer: Layer) -> usize {
        (1..=self.n_max(layer)).map(Self::per_size).sum()
    }

    pub fn theta_offset(&self, layer: Layer) -> usize {
        match layer {
            Layer::Household => 2,
            Layer::Workplace => 2 + self.n_max[0],
        }
    }

    /// Flat index of `θ^X_n`, `1 <= n <= n_max_X`.
    pub fn theta(&self, layer: Layer, n: usize) -> usize {
        debug_assert!(n >= 1 && n <= self.n_max(layer));
        self.theta_offset(layer) + n - 1
    }

    pub fn block_offset(&self, layer: Layer) -> usize {
        let base = 2 + self.n_max[0] + self.n_max[1];
        match layer {
            Layer::Household => base,
            Layer::Workplace => base + self.block_len(Layer::Household),
        }
    }

    pub fn dim(&self) -> usize {
        self.block_offset(Layer::Workplace) + self.block_len(Layer::Workplace)
    }

    /// Flat index of `n^X_{(S,I,R)}`.
    pub fn index(&self, layer: Layer, s: usize, i: usize, r: usize) -> Option<usize> {
        let n = s + i + r;
        if n == 0 || n > self.n_max(layer) {
            return None;
        }
        let before: usize = (1..n).map(Self::per_size).sum();
        // Within size n: I-major, R ascending; I = j contributes n − j + 1 slots.
        let within: usize = (0..i).map(|j| n - j + 1).sum::<usize>() + r;
        Some(self.block_offset(layer) + before + within)
    }

    pub fn triples(&self, layer: Layer) -> impl Iterator<Item = (usize, usize, usize)> {
        let n_max = self.n_max(layer);
        (1..=n_max).flat_map(|n| (0..=n).flat_map(move |i| (0..=n - i).map(move |r| (n - i - r, i, r))))
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = vec!["i".to_string(), "thetaG".into()];
        for layer in Layer::BOTH {
            for n in 1..=self.n_max(layer) {
                names.push(format!("theta{}_{n}", layer.tag()));
            }
        }
        for layer in Layer::BOTH {
            for (s, i, r) in self.triples(layer) {
                names.push(format!("n{}_{s}_{i}_{r}", layer.tag()));
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

#[derive(Clone, Debug)]
struct Triple {
    size: usize,
    s: f64,
    i: f64,
    /// Local index of `(S, I+1, R−1)` when `R >= 1`.
    recovery_source: Option<usize>,
    /// Local index of `(S+1, I−1, R)` when the infection gain applies.
    infection_source: Option<usize>,
    active: bool,
}

#[derive(Clone, Debug)]
struct Block {
    layer: Layer,
    offset: usize,
    lambda: f64,
    /// Size-biased law `π̂_n`, index `n − 1`.
    biased: Vec<f64>,
    triples: Vec<Triple>,
}

#[derive(Clone, Debug)]
pub struct EbcmModel {
    params: ReducedParams,
    form: BalanceForm,
    indexer: TripleIndexer,
    blocks: [Block; 2],
}

impl EbcmModel {
    pub fn new(params: ReducedParams, form: BalanceForm) -> Result<Self> {
        params.validate()?;
        let indexer = TripleIndexer::new(params.households.n_max(), params.workplaces.n_max());
        let blocks = Layer::BOTH.map(|layer| {
            let offset = indexer.block_offset(layer);
            let min_gain_i = match form {
                BalanceForm::Printed => 2,
                BalanceForm::Corrected => 1,
            };
            let local = |s, i, r| indexer.index(layer, s, i, r).map(|g| g - offset);
            let triples = indexer
                .triples(layer)
                .map(|(s, i, r)| Triple {
                    size: s + i + r,
                    s: s as f64,
                    i: i as f64,
                    recovery_source: if r >= 1 { local(s, i + 1, r - 1) } else { None },
                    infection_source: if i >= min_gain_i { local(s + 1, i - 1, r) } else { None },
                    active: s + i + r >= 2 && (s >= 2 || s * i >= 1),
                })
                .collect();
            Block {
                layer,
                offset,
                lambda: params.lambda(layer),
                biased: params.dist(layer).size_biased().probs().to_vec(),
                triples,
            }
        });
        Ok(Self {
            params,
            form,
            indexer,
            blocks,
        })
    }

    pub fn params(&self) -> &ReducedParams {
        &self.params
    }

    pub fn form(&self) -> BalanceForm {
        self.form
    }

    pub fn indexer(&self) -> &TripleIndexer {
        &self.indexer
    }

    pub fn dim(&self) -> usize {
        self.indexer.dim()
    }

    fn thetas<'a>(&self, y: &'a [f64], layer: Layer) -> &'a [f64] {
        let o = self.indexer.theta_offset(layer);
        &y[o..o + self.indexer.n_max(layer)]
    }

    /// `Σ_n π̂^X_n θ^X_n`.
    fn escape(&self, y: &[f64], layer: Layer) -> f64 {
        let b = &self.blocks[lidx(layer)];
        b.biased.iter().zip(self.thetas(y, layer)).map(|(p, t)| p * t).sum()
    }

    /// `s = θ^G Π_X Σ_n π̂^X_n θ^X_n`.
    pub fn recover_s(&self, y: &[f64]) -> f64 {
        y[1] * self.escape(y, Layer::Household) * self.escape(y, Layer::Workplace)
    }

    /// `T^X_n = λ_X Σ_{S+I+R=n} S I n^X_{(S,I,R)}`, index `n − 1`.
    fn within_rates(&self, y: &[f64], layer: Layer) -> Vec<f64> {
        let b = &self.blocks[lidx(layer)];
        let mut t = vec![0.0; self.indexer.n_max(layer)];
        for (k, tr) in b.triples.iter().enumerate() {
            t[tr.size - 1] += b.lambda * tr.s * tr.i * y[b.offset + k];
        }
        t
    }

    pub fn initial_condition(&self, epsilon: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidParameter(format!(
                "initial infected fraction must lie in [0, 1], got {epsilon}"
            )));
        }
        if epsilon > 0.01 {
            log::warn!("edge-based initial condition is only meaningful for small epsilon, got {epsilon}");
        }
        let mut y = vec![0.0; self.dim()];
        y[0] = epsilon;
        y[1] = 1.0 - epsilon;
        for layer in Layer::BOTH {
            let b = &self.blocks[lidx(layer)];
            for n in 1..=self.indexer.n_max(layer) {
                y[self.indexer.theta(layer, n)] = 1.0 - epsilon;
                let p = b.biased[n - 1];
                let idx = self.indexer.index(layer, n, 0, 0).expect("in range");
                y[idx] = p * (1.0 - epsilon).powi(n as i32) / n as f64;
                for i in 1..n {
                    let idx = self.indexer.index(layer, n - i, i, 0).expect("in range");
                    y[idx] = p * (1.0 - epsilon).powi((n - i) as i32) * epsilon.powi(i as i32);
                }
            }
        }
        Ok(y)
    }

    pub fn rhs(&self, y: &[f64], dy: &mut [f64]) -> Result<()> {
        debug_assert_eq!(y.len(), self.dim());
        let p = &self.params;
        let i = y[0];
        let theta_g = y[1];
        let escape = Layer::BOTH.map(|l| self.escape(y, l));
        let within = Layer::BOTH.map(|l| self.within_rates(y, l));
        let s = theta_g * escape[0] * escape[1];

        dy.fill(0.0);
        let d_theta_g = -p.beta_g * i * theta_g;
        dy[1] = d_theta_g;
        let mut d_escape = [0.0; 2];
        for layer in Layer::BOTH {
            let x = lidx(layer);
            let b = &self.blocks[x];
            let thetas = self.thetas(y, layer);
            let ext_within: f64 = within[1 - x].iter().sum();
            let global = match self.form {
                BalanceForm::Corrected => p.beta_g * i * s,
                BalanceForm::Printed => p.beta_g * i,
            };
            // External pressure per susceptible for each size, index n − 1.
            let mut pressure = vec![0.0; thetas.len()];
            for n in 2..=thetas.len() {
                let pn = b.biased[n - 1];
                if pn == 0.0 {
                    continue;
                }
                // T_n θ_n / m_n with θ_n cancelled: m_n = θ^G π̂_n θ_n Σ π̂^X̄ θ^X̄.
                let others = theta_g * pn * escape[1 - x];
                let ti = self.indexer.theta(layer, n);
                if others < M_FLOOR {
                    if within[x][n - 1] > M_FLOOR {
                        return Err(Error::DegenerateState(format!(
                            "no susceptibles left outside {} structures of size {n} while transmission persists",
                            layer.tag()
                        )));
                    }
                    continue;
                }
                dy[ti] = -within[x][n - 1] / others;
                d_escape[x] += pn * dy[ti];
                let m = others * thetas[n - 1];
                if m >= M_FLOOR {
                    let tau = (global + ext_within) * pn * thetas[n - 1] / escape[x];
                    pressure[n - 1] = tau / m;
                }
            }
            let n_block = &y[b.offset..b.offset + b.triples.len()];
            for (k, tr) in b.triples.iter().enumerate() {
                if !tr.active {
                    continue;
                }
                let ext = pressure[tr.size - 1];
                let mut d = -(b.lambda * tr.s * tr.i + ext * tr.s + p.gamma * tr.i) * n_block[k];
                if let Some(src) = tr.recovery_source {
                    d += p.gamma * (tr.i + 1.0) * n_block[src];
                }
                if let Some(src) = tr.infection_source {
                    d += (b.lambda * (tr.s + 1.0) * (tr.i - 1.0) + ext * (tr.s + 1.0)) * n_block[src];
                }
                dy[b.offset + k] = d;
            }
            debug_assert_eq!(b.layer, layer);
        }
        let ds =
            d_theta_g * escape[0] * escape[1] + theta_g * d_escape[0] * escape[1] + theta_g * escape[0] * d_escape[1];
        dy[0] = -ds - p.gamma * i;
        Ok(())
    }

    pub fn rhs_vec(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut dy = vec![0.0; y.len()];
        self.rhs(y, &mut dy)?;
        Ok(dy)
    }

    /// Derivative of `recover_s` along the vector field.
    pub fn s_derivative(&self, y: &[f64]) -> Result<f64> {
        let dy = self.rhs_vec(y)?;
        Ok(-dy[0] - self.params.gamma * y[0])
    }

    pub fn solve(&self, y0: &[f64], t_end: f64, config: &IntegratorConfig) -> Result<EbcmSolution> {
        if y0.len() != self.dim() {
            return Err(Error::InvalidParameter(format!(
                "state has {} entries, expected {}",
                y0.len(),
                self.dim()
            )));
        }
        let dense = integrate(|_, y: &[f64], dy: &mut [f64]| self.rhs(y, dy), y0, (0.0, t_end), config)?;
        Ok(EbcmSolution {
            dense,
            model: self.clone(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct EbcmSolution {
    pub dense: DenseSolution,
    model: EbcmModel,
}

impl EbcmSolution {
    pub fn i(&self, t: f64) -> f64 {
        self.dense.component_at(t, 0)
    }

    pub fn s(&self, t: f64) -> f64 {
        self.model.recover_s(&self.dense.at(t))
    }

    pub fn state(&self, t: f64) -> Vec<f64> {
        self.dense.at(t)
    }

    pub fn threshold_time(&self, level: f64) -> Option<f64> {
        find_threshold_time(&self.dense, 0, level)
    }

    /// CSV `t,s,i`, optionally followed by the full state.
    pub fn write_csv<W: Write>(&self, mut out: W, grid: &[f64], full_state: bool) -> Result<()> {
        let mut header = vec!["t".to_string(), "s".into()];
        if full_state {
            header.extend(self.model.indexer.column_names());
        } else {
            header.push("i".into());
        }
        writeln!(out, "{}", header.join(","))?;
        for &t in grid {
            let y = self.dense.at(t);
            let mut row = vec![t.to_string(), self.model.recover_s(&y).to_string()];
            if full_state {
                row.extend(y.iter().map(f64::to_string));
            } else {
                row.push(y[0].to_string());
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::size_dist::{default_households, SizeDistribution};

    fn params(h: SizeDistribution, w: SizeDistribution) -> ReducedParams {
        ReducedParams {
            beta_g: 0.125,
            lambda_h: 1.5,
            lambda_w: 0.00115,
            gamma: 0.125,
            households: h,
            workplaces: w,
        }
    }

    fn dist(pairs: &[(usize, f64)]) -> SizeDistribution {
        SizeDistribution::from_pairs(pairs.iter().copied()).unwrap()
    }

    #[test]
    fn indexer_counts_and_order() {
        let ix = TripleIndexer::new(3, 2);
        assert_eq!(ix.block_len(Layer::Household), 3 + 6 + 10);
        assert_eq!(ix.block_len(Layer::Workplace), 3 + 6);
        assert_eq!(ix.dim(), 2 + 5 + 19 + 9);
        for layer in Layer::BOTH {
            for (pos, (s, i, r)) in ix.triples(layer).enumerate() {
                assert_eq!(ix.index(layer, s, i, r), Some(ix.block_offset(layer) + pos));
            }
        }
        let first: Vec<_> = ix.triples(Layer::Household).take(5).collect();
        assert_eq!(first, vec![(1, 0, 0), (0, 0, 1), (0, 1, 0), (2, 0, 0), (1, 0, 1)]);
        assert_eq!(ix.column_names().len(), ix.dim());
    }

    #[test]
    fn dimension_grows_cubically() {
        for n in [1, 5, 10, 20] {
            let ix = TripleIndexer::new(n, n);
            let closed = n * (n + 1) * (n + 2) / 6 + n * (n + 1) / 2 + n;
            assert_eq!(ix.block_len(Layer::Household), closed);
            assert_eq!(ix.dim(), 2 + 2 * n + 2 * closed);
        }
    }

    #[test]
    fn recover_s_examples() {
        let m = EbcmModel::new(
            params(default_households(), dist(&[(1, 0.3), (4, 0.7)])),
            BalanceForm::Printed,
        )
        .unwrap();
        let mut y = m.initial_condition(0.0).unwrap();
        assert_eq!(m.recover_s(&y), 1.0);
        y[1] = 0.9;
        for n in 1..=5 {
            y[m.indexer().theta(Layer::Household, n)] = 0.8;
        }
        for n in 1..=4 {
            y[m.indexer().theta(Layer::Workplace, n)] = 0.7;
        }
        assert!((m.recover_s(&y) - 0.504).abs() < 1e-12);
        y[1] = 0.0;
        assert_eq!(m.recover_s(&y), 0.0);
    }

    #[test]
    fn initial_condition_as_stated() {
        let m = EbcmModel::new(params(dist(&[(2, 1.0)]), dist(&[(1, 1.0)])), BalanceForm::Printed).unwrap();
        let y = m.initial_condition(1e-3).unwrap();
        let idx = m.indexer().index(Layer::Household, 2, 0, 0).unwrap();
        assert!((y[idx] - 0.5 * 0.999f64.powi(2)).abs() < 1e-15);
        let idx = m.indexer().index(Layer::Household, 1, 1, 0).unwrap();
        assert!((y[idx] - 0.999 * 1e-3).abs() < 1e-15);
        assert_eq!(y[0], 1e-3);
        assert_eq!(y[1], 0.999);

        let y = m.initial_condition(0.0).unwrap();
        assert_eq!(m.recover_s(&y), 1.0);
        assert_eq!(y[m.indexer().index(Layer::Household, 2, 0, 0).unwrap()], 0.5);
    }

    #[test]
    fn disease_free_state_is_fixed() {
        for form in [BalanceForm::Printed, BalanceForm::Corrected] {
            let m = EbcmModel::new(params(default_households(), dist(&[(1, 0.2), (3, 0.8)])), form).unwrap();
            let y = m.initial_condition(0.0).unwrap();
            assert!(m.rhs_vec(&y).unwrap().iter().all(|&d| d == 0.0));
        }
    }

    #[test]
    fn global_layer_decouples_without_local_transmission() {
        let mut p = params(default_households(), dist(&[(2, 0.5), (3, 0.5)]));
        p.lambda_h = 0.0;
        p.lambda_w = 0.0;
        let m = EbcmModel::new(p, BalanceForm::Corrected).unwrap();
        let y0 = m.initial_condition(0.01).unwrap();
        let sol = m
            .solve(&y0, 30.0, &IntegratorConfig::with_tolerances(1e-9, 1e-12))
            .unwrap();
        let end = sol.dense.final_state();
        for layer in Layer::BOTH {
            for n in 1..=m.indexer().n_max(layer) {
                assert_eq!(end[m.indexer().theta(layer, n)], 0.99);
            }
        }
        // θ^G = θ^G(0) exp(−β_G ∫ i), with ∫ i by the trapezoidal rule on a fine grid.
        let grid: Vec<f64> = (0..=30_000).map(|k| k as f64 * 1e-3).collect();
        let integral: f64 = grid.windows(2).map(|w| 0.5 * (sol.i(w[0]) + sol.i(w[1])) * 1e-3).sum();
        let expected = 0.99 * (-0.125 * integral).exp();
        assert!((end[1] - expected).abs() < 1e-6, "{} vs {expected}", end[1]);
    }

    #[test]
    fn thetas_monotone_and_size_one_constant() {
        let p = params(default_households(), dist(&[(1, 0.2), (2, 0.3), (4, 0.5)]));
        let m = EbcmModel::new(p, BalanceForm::Corrected).unwrap();
        let sol = m
            .solve(&m.initial_condition(0.005).unwrap(), 60.0, &IntegratorConfig::default())
            .unwrap();
        let mut prev = sol.state(0.0);
        for k in 1..=120 {
            let y = sol.state(k as f64 * 0.5);
            assert!(y[1] <= prev[1] + 1e-12);
            for layer in Layer::BOTH {
                let t1 = m.indexer().theta(layer, 1);
                assert!((y[t1] - 0.995).abs() < 1e-10);
                for n in 2..=m.indexer().n_max(layer) {
                    let t = m.indexer().theta(layer, n);
                    assert!(y[t] <= prev[t] + 1e-12);
                }
            }
            // i' = −s' − γ i along the solution.
            let ds = m.s_derivative(&y).unwrap();
            let dy = m.rhs_vec(&y).unwrap();
            assert!((dy[0] + ds + 0.125 * y[0]).abs() < 1e-12);
            prev = y;
        }
    }
}
