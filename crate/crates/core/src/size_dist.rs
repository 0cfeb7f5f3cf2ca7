//! Structure-size distributions on `1..=n_max`.

use std::collections::BTreeMap;
use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Probabilities within this distance of summing to one are renormalized;
/// anything further off is rejected.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// A probability law over structure sizes, stored densely: `probs[j - 1]` is
/// the probability of size `j`.
#[derive(Clone)]
pub struct SizeDistribution {
    probs: Vec<f64>,
    sampler: WeightedIndex<f64>,
}

impl SizeDistribution {
    /// Builds a distribution from dense probabilities for sizes `1..=probs.len()`.
    /// Trailing zero entries are trimmed so that `n_max` is the largest size
    /// actually carrying mass.
    pub fn from_dense(probs: Vec<f64>) -> Result<Self> {
        let mut probs = probs;
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidDistribution(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        while probs.last() == Some(&0.0) {
            probs.pop();
        }
        if probs.is_empty() {
            return Err(Error::InvalidDistribution(
                "no size carries positive probability".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        for p in &mut probs {
            *p /= total;
        }
        let sampler = WeightedIndex::new(&probs).map_err(|e| Error::InvalidDistribution(e.to_string()))?;
        Ok(Self { probs, sampler })
    }

    /// Builds a distribution from `(size, probability)` pairs. Sizes must be
    /// at least one; repeated sizes are rejected.
    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let mut map = BTreeMap::new();
        for (size, p) in pairs {
            if size == 0 {
                return Err(Error::InvalidDistribution("size 0 is not allowed".into()));
            }
            if map.insert(size, p).is_some() {
                return Err(Error::InvalidDistribution(format!("size {size} given twice")));
            }
        }
        let n_max = map.keys().next_back().copied().unwrap_or(0);
        let mut dense = vec![0.0; n_max];
        for (size, p) in map {
            dense[size - 1] = p;
        }
        Self::from_dense(dense)
    }

    pub fn point_mass(size: usize) -> Result<Self> {
        Self::from_pairs([(size, 1.0)])
    }

    pub fn n_max(&self) -> usize {
        self.probs.len()
    }

    /// Probability of `size`; zero outside the support.
    pub fn prob(&self, size: usize) -> f64 {
        if size == 0 {
            0.0
        } else {
            self.probs.get(size - 1).copied().unwrap_or(0.0)
        }
    }

    /// Dense probabilities, index `j - 1` for size `j`.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `(size, probability)` for every size with positive mass.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(j, p)| (j + 1, *p))
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(j, p)| (j + 1) as f64 * p).sum()
    }

    /// Law of the size of the structure containing a uniformly chosen
    /// individual: `n * p_n / mean`.
    pub fn size_biased(&self) -> Self {
        let m = self.mean();
        let dense = self
            .probs
            .iter()
            .enumerate()
            .map(|(j, p)| (j + 1) as f64 * p / m)
            .collect();
        Self::from_dense(dense).expect("size-biasing preserves validity")
    }

    /// Copy restricted to sizes `1..=n_max`, renormalized.
    pub fn truncated(&self, n_max: usize) -> Result<Self> {
        let mut dense: Vec<f64> = self.probs.iter().take(n_max).copied().collect();
        let total: f64 = dense.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution(format!("no mass left below size {n_max}")));
        }
        dense.iter_mut().for_each(|p| *p /= total);
        Self::from_dense(dense)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sampler.sample(rng) + 1
    }

    /// Total-variation distance `½ Σ |p_j − q_j|`.
    pub fn total_variation(&self, other: &SizeDistribution) -> f64 {
        let n = self.n_max().max(other.n_max());
        0.5 * (1..=n).map(|j| (self.prob(j) - other.prob(j)).abs()).sum::<f64>()
    }
}

impl PartialEq for SizeDistribution {
    fn eq(&self, other: &Self) -> bool {
        self.probs == other.probs
    }
}

impl fmt::Debug for SizeDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.support()).finish()
    }
}

/// Serialized as a table of `size = probability` entries.
impl Serialize for SizeDistribution {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_map(self.support().map(|(j, p)| (j.to_string(), p)))
    }
}

impl<'de> Deserialize<'de> for SizeDistribution {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let map = BTreeMap::<String, f64>::deserialize(deserializer)?;
        let pairs = map
            .into_iter()
            .map(|(k, p)| {
                k.trim()
                    .parse::<usize>()
                    .map(|j| (j, p))
                    .map_err(|_| D::Error::custom(format!("invalid structure size {k:?}")))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        SizeDistribution::from_pairs(pairs).map_err(D::Error::custom)
    }
}

/// Synthetic household sizes shipped as a default. Not census data.
pub fn default_households() -> SizeDistribution {
    SizeDistribution::from_pairs([(1, 0.3), (2, 0.3), (3, 0.2), (4, 0.15), (5, 0.05)]).expect("valid default")
}

/// Synthetic workplace sizes shipped as a default: geometric decay with ratio
/// 0.9 on `1..=50`, normalized. Not census data.
pub fn default_workplaces() -> SizeDistribution {
    let weights: Vec<f64> = (0..50).map(|j| 0.9f64.powi(j)).collect();
    let total: f64 = weights.iter().sum();
    SizeDistribution::from_dense(weights.into_iter().map(|w| w / total).collect()).expect("valid default")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    fn dist(pairs: &[(usize, f64)]) -> SizeDistribution {
        SizeDistribution::from_pairs(pairs.iter().copied()).unwrap()
    }

    #[test]
    fn mean_examples() {
        assert_eq!(dist(&[(1, 0.5), (2, 0.5)]).mean(), 1.5);
        assert_eq!(dist(&[(3, 1.0)]).mean(), 3.0);
        assert_eq!(dist(&[(1, 0.25), (2, 0.25), (4, 0.5)]).mean(), 2.75);
    }

    #[test]
    fn size_biased_examples() {
        let b = dist(&[(1, 0.5), (2, 0.5)]).size_biased();
        assert!((b.prob(1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((b.prob(2) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(dist(&[(3, 1.0)]).size_biased(), dist(&[(3, 1.0)]));
        let b = dist(&[(2, 0.5), (4, 0.5)]).size_biased();
        assert!((b.prob(2) - 1.0 / 3.0).abs() < 1e-15);
        assert!((b.prob(4) - 2.0 / 3.0).abs() < 1e-15);
        assert!((b.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(SizeDistribution::from_pairs([(1, 0.5), (2, 0.4)]).is_err());
        assert!(SizeDistribution::from_pairs([(1, -0.5), (2, 1.5)]).is_err());
        assert!(SizeDistribution::from_pairs([(0, 1.0)]).is_err());
        assert!(SizeDistribution::from_dense(vec![0.0, 0.0]).is_err());
        // Rounding noise in text files is absorbed.
        let d = SizeDistribution::from_pairs([(1, 0.3333333333), (2, 0.6666666667)]).unwrap();
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(dist(&[(1, 0.5), (2, 0.5), (3, 0.0)]).n_max(), 2);
    }

    #[test]
    fn point_mass_sample() {
        let d = dist(&[(3, 1.0)]);
        let mut rng = stream(1, 0);
        assert!((0..100).all(|_| d.sample(&mut rng) == 3));
    }

    #[test]
    fn sampling_is_reproducible() {
        let d = dist(&[(1, 0.5), (2, 0.5)]);
        let draw = |seed| {
            let mut rng = stream(seed, 0);
            (0..64).map(|_| d.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(11), draw(11));
    }

    #[test]
    fn empirical_frequencies_within_three_sigma() {
        let d = dist(&[(1, 0.2), (2, 0.5), (4, 0.3)]);
        let n = 1_000_000;
        let mut counts = [0usize; 5];
        let mut rng = stream(2024, 0);
        for _ in 0..n {
            counts[d.sample(&mut rng)] += 1;
        }
        for (j, &count) in counts.iter().enumerate().skip(1) {
            let p = d.prob(j);
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            let freq = count as f64 / n as f64;
            assert!((freq - p).abs() <= 3.0 * sigma + 1e-12, "size {j}: {freq} vs {p}");
        }
    }

    #[test]
    fn toml_round_trip() {
        let d: SizeDistribution = toml::from_str("1 = 0.25\n2 = 0.25\n4 = 0.5\n").unwrap();
        assert_eq!(d, dist(&[(1, 0.25), (2, 0.25), (4, 0.5)]));
        let back: SizeDistribution = toml::from_str(&toml::to_string(&d).unwrap()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn defaults_are_valid() {
        assert_eq!(default_households().n_max(), 5);
        assert_eq!(default_workplaces().n_max(), 50);
        let w = default_workplaces();
        assert!(w.prob(1) > w.prob(2) && w.prob(49) > w.prob(50));
    }

    proptest! {
        #[test]
        fn mean_bounds_and_size_bias(weights in prop::collection::vec(0.0f64..1.0, 1..30)) {
            prop_assume!(weights.iter().sum::<f64>() > 1e-6);
            let total: f64 = weights.iter().sum();
            let d = SizeDistribution::from_dense(weights.iter().map(|w| w / total).collect()).unwrap();
            let m = d.mean();
            prop_assert!(m >= 1.0 - 1e-12 && m <= d.n_max() as f64 + 1e-12);
            let b = d.size_biased();
            prop_assert!((b.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(b.mean() >= m - 1e-12);
        }
    }
}
