//! Two-layer population structure: every individual belongs to exactly one
//! household and one workplace, each layer being an independent random
//! partition of the population into cliques.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::size_dist::SizeDistribution;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Layer {
    #[serde(rename = "H")]
    Household,
    #[serde(rename = "W")]
    Workplace,
}

impl Layer {
    pub const BOTH: [Layer; 2] = [Layer::Household, Layer::Workplace];

    pub fn other(self) -> Layer {
        match self {
            Layer::Household => Layer::Workplace,
            Layer::Workplace => Layer::Household,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Layer::Household => "H",
            Layer::Workplace => "W",
        }
    }
}

/// A partition of `0..K` into structures. Structure ids follow creation
/// order and member lists are sorted by individual id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    structure_of: Vec<u32>,
    members: Vec<Vec<u32>>,
}

impl Partition {
    pub fn from_members(k: usize, members: Vec<Vec<u32>>) -> Result<Self> {
        let mut structure_of = vec![u32::MAX; k];
        for (id, list) in members.iter().enumerate() {
            if list.is_empty() {
                return Err(Error::InvalidParameter(format!("structure {id} is empty")));
            }
            for &ind in list {
                let slot = structure_of
                    .get_mut(ind as usize)
                    .ok_or_else(|| Error::InvalidParameter(format!("individual {ind} out of range")))?;
                if *slot != u32::MAX {
                    return Err(Error::InvalidParameter(format!("individual {ind} assigned twice")));
                }
                *slot = id as u32;
            }
        }
        if let Some(ind) = structure_of.iter().position(|&s| s == u32::MAX) {
            return Err(Error::InvalidParameter(format!("individual {ind} unassigned")));
        }
        let members = members
            .into_iter()
            .map(|mut l| {
                l.sort_unstable();
                l
            })
            .collect();
        Ok(Self { structure_of, members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn structure_of(&self, individual: usize) -> usize {
        self.structure_of[individual] as usize
    }

    pub fn members(&self, structure: usize) -> &[u32] {
        &self.members[structure]
    }

    pub fn sizes(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().map(Vec::len)
    }

    pub fn max_size(&self) -> usize {
        self.sizes().max().unwrap_or(0)
    }
}

/// Sequential clique assembly: while `k > 0` individuals are unassigned, draw
/// a target size from `dist`, truncate it to `k`, and fill the new structure
/// with individuals picked uniformly among the unassigned ones (partial
/// Fisher–Yates over the pool).
pub fn assemble_layer<R: Rng + ?Sized>(k: usize, dist: &SizeDistribution, rng: &mut R) -> Partition {
    let mut pool: Vec<u32> = (0..k as u32).collect();
    let mut remaining = k;
    let mut members = Vec::new();
    let mut structure_of = vec![0u32; k];
    while remaining > 0 {
        let size = dist.sample(rng).min(remaining);
        let id = members.len() as u32;
        let mut list = Vec::with_capacity(size);
        for _ in 0..size {
            let pick = rng.random_range(0..remaining);
            pool.swap(pick, remaining - 1);
            remaining -= 1;
            let ind = pool[remaining];
            structure_of[ind as usize] = id;
            list.push(ind);
        }
        list.sort_unstable();
        members.push(list);
    }
    Partition { structure_of, members }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PopulationGraph {
    households: Partition,
    workplaces: Partition,
}

impl PopulationGraph {
    /// Households are assembled first, then workplaces, from the same
    /// stream: the household partition does not depend on `workplaces`.
    pub fn build<R: Rng + ?Sized>(
        k: usize,
        households: &SizeDistribution,
        workplaces: &SizeDistribution,
        rng: &mut R,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("population size must be >= 1".into()));
        }
        let households = assemble_layer(k, households, rng);
        let workplaces = assemble_layer(k, workplaces, rng);
        Ok(Self { households, workplaces })
    }

    pub fn from_partitions(households: Partition, workplaces: Partition) -> Result<Self> {
        if households.structure_of.len() != workplaces.structure_of.len() {
            return Err(Error::InvalidParameter(
                "household and workplace partitions cover different populations".into(),
            ));
        }
        Ok(Self { households, workplaces })
    }

    /// Population size `K`.
    pub fn size(&self) -> usize {
        self.households.structure_of.len()
    }

    pub fn layer(&self, layer: Layer) -> &Partition {
        match layer {
            Layer::Household => &self.households,
            Layer::Workplace => &self.workplaces,
        }
    }

    pub fn household_of(&self, individual: usize) -> usize {
        self.households.structure_of(individual)
    }

    pub fn workplace_of(&self, individual: usize) -> usize {
        self.workplaces.structure_of(individual)
    }

    /// Observed fraction of structures of each size in `layer`.
    pub fn empirical_size_dist(&self, layer: Layer) -> SizeDistribution {
        let part = self.layer(layer);
        let mut counts = vec![0.0; part.max_size()];
        for n in part.sizes() {
            counts[n - 1] += 1.0;
        }
        let total = part.len() as f64;
        SizeDistribution::from_dense(counts.into_iter().map(|c| c / total).collect()).expect("non-empty partition")
    }

    /// Checks the structural invariants: every individual in exactly one
    /// structure per layer, sizes within `[1, n_max]` and `K/n_max <= K_X <= K`.
    pub fn validate(&self, n_max: [usize; 2]) -> Result<()> {
        let k = self.size();
        for (layer, n_max) in Layer::BOTH.into_iter().zip(n_max) {
            let part = self.layer(layer);
            let mut seen = vec![false; k];
            let mut total = 0;
            for (id, list) in part.members.iter().enumerate() {
                if list.is_empty() || list.len() > n_max {
                    return Err(Error::InvalidParameter(format!(
                        "{} structure {id} has size {}",
                        layer.tag(),
                        list.len()
                    )));
                }
                for &ind in list {
                    let ind = ind as usize;
                    if seen[ind] || part.structure_of[ind] as usize != id {
                        return Err(Error::InvalidParameter(format!(
                            "individual {ind} misassigned in layer {}",
                            layer.tag()
                        )));
                    }
                    seen[ind] = true;
                }
                total += list.len();
            }
            if total != k || seen.iter().any(|s| !s) {
                return Err(Error::InvalidParameter(format!(
                    "layer {} does not cover the population",
                    layer.tag()
                )));
            }
            let kx = part.len();
            if kx * n_max < k || kx > k {
                return Err(Error::InvalidParameter(format!(
                    "layer {} has {kx} structures for K = {k}",
                    layer.tag()
                )));
            }
        }
        Ok(())
    }

    /// CSV with header `individual,household_id,workplace_id`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "individual,household_id,workplace_id")?;
        for ind in 0..self.size() {
            writeln!(out, "{},{},{}", ind, self.household_of(ind), self.workplace_of(ind))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn dist(pairs: &[(usize, f64)]) -> SizeDistribution {
        SizeDistribution::from_pairs(pairs.iter().copied()).unwrap()
    }

    #[test]
    fn last_structure_is_truncated() {
        let p = assemble_layer(5, &dist(&[(2, 1.0)]), &mut stream(3, 0));
        assert_eq!(p.sizes().collect::<Vec<_>>(), vec![2, 2, 1]);
    }

    #[test]
    fn single_individual() {
        let p = assemble_layer(1, &dist(&[(1, 0.2), (4, 0.8)]), &mut stream(3, 0));
        assert_eq!(p.sizes().collect::<Vec<_>>(), vec![1]);
        assert_eq!(p.members(0), &[0]);
    }

    #[test]
    fn deterministic_sizes() {
        let g = PopulationGraph::build(4, &dist(&[(2, 1.0)]), &dist(&[(4, 1.0)]), &mut stream(1, 0)).unwrap();
        assert_eq!(g.layer(Layer::Household).sizes().collect::<Vec<_>>(), vec![2, 2]);
        assert_eq!(g.layer(Layer::Workplace).sizes().collect::<Vec<_>>(), vec![4]);
        assert_eq!(g.layer(Layer::Workplace).members(0), &[0, 1, 2, 3]);
        g.validate([2, 4]).unwrap();
    }

    #[test]
    fn household_partition_ignores_workplace_law() {
        let h = dist(&[(1, 0.3), (2, 0.4), (3, 0.3)]);
        let a = PopulationGraph::build(500, &h, &dist(&[(5, 1.0)]), &mut stream(9, 0)).unwrap();
        let b = PopulationGraph::build(500, &h, &dist(&[(1, 0.5), (20, 0.5)]), &mut stream(9, 0)).unwrap();
        assert_eq!(a.layer(Layer::Household), b.layer(Layer::Household));
        assert_ne!(a.layer(Layer::Workplace), b.layer(Layer::Workplace));
    }

    #[test]
    fn invariants_hold_on_default_graph() {
        let h = crate::size_dist::default_households();
        let w = crate::size_dist::default_workplaces();
        let g = PopulationGraph::build(10_000, &h, &w, &mut stream(5, 0)).unwrap();
        g.validate([h.n_max(), w.n_max()]).unwrap();
        for layer in Layer::BOTH {
            let part = g.layer(layer);
            assert_eq!(part.sizes().sum::<usize>(), 10_000);
            for ind in 0..g.size() {
                assert!(part.members(part.structure_of(ind)).contains(&(ind as u32)));
            }
        }
    }

    #[test]
    fn empirical_counts() {
        let households = Partition::from_members(5, vec![vec![0, 1], vec![2, 3], vec![4]]).unwrap();
        let workplaces = Partition::from_members(5, vec![vec![0, 1, 2, 3, 4]]).unwrap();
        let g = PopulationGraph::from_partitions(households, workplaces).unwrap();
        let e = g.empirical_size_dist(Layer::Household);
        assert!((e.prob(1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((e.prob(2) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(g.empirical_size_dist(Layer::Workplace), dist(&[(5, 1.0)]));
    }

    #[test]
    fn from_members_rejects_overlap() {
        assert!(Partition::from_members(3, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(Partition::from_members(3, vec![vec![0, 1]]).is_err());
    }

    #[test]
    fn csv_export() {
        let g = PopulationGraph::build(4, &dist(&[(2, 1.0)]), &dist(&[(4, 1.0)]), &mut stream(1, 0)).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("individual,household_id,workplace_id\n0,"));
        assert_eq!(text.lines().count(), 5);
    }
}
