use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hwsir::analysis::{align_by_threshold, sup_distance, Component, Curve};
use hwsir::fenwick::FenwickSampler;
use hwsir::graph::{Layer, PopulationGraph};
use hwsir::reduced::{ReducedModel, ReducedParams, StateIndexer};
use hwsir::rng::stream;
use hwsir::size_dist::SizeDistribution;

fn size_dist(max_len: usize) -> impl Strategy<Value = SizeDistribution> {
    prop::collection::vec(0.0f64..1.0, 1..=max_len).prop_filter_map("no mass", |w| {
        let total: f64 = w.iter().sum();
        (total > 1e-6).then(|| SizeDistribution::from_dense(w.iter().map(|x| x / total).collect()).unwrap())
    })
}

fn reduced_params() -> impl Strategy<Value = ReducedParams> {
    (
        0.0f64..2.0,
        0.0f64..3.0,
        0.0f64..0.5,
        0.05f64..1.0,
        size_dist(6),
        size_dist(8),
    )
        .prop_map(
            |(beta_g, lambda_h, lambda_w, gamma, households, workplaces)| ReducedParams {
                beta_g,
                lambda_h,
                lambda_w,
                gamma,
                households,
                workplaces,
            },
        )
}

fn interior_point(model: &ReducedModel, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = vec![0.0; model.dim()];
    let s = rng.random_range(0.05..0.95);
    y[0] = s;
    y[1] = rng.random_range(0.0..(1.0 - s));
    for layer in Layer::BOTH {
        let comps: Vec<(usize, usize)> = model.indexer().compositions(layer).collect();
        if comps.is_empty() {
            continue;
        }
        let raw: Vec<f64> = comps.iter().map(|_| rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let total_s: f64 = comps.iter().zip(&raw).map(|(c, r)| c.0 as f64 * r).sum();
        let mean = model.params().dist(layer).mean();
        let scale = (0.9 / total).min(0.9 * mean * s / total_s);
        for (&(ss, ii), r) in comps.iter().zip(raw) {
            y[model.indexer().index(layer, ss, ii).unwrap()] = r * scale;
        }
    }
    y
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn size_biased_law_is_normalised(d in size_dist(20)) {
        let b = d.size_biased();
        prop_assert!((b.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (n, p) in d.support() {
            prop_assert!((b.prob(n) - n as f64 * p / d.mean()).abs() < 1e-12);
        }
    }

    #[test]
    fn indexer_positions_are_a_bijection(nh in 1usize..12, nw in 1usize..12) {
        let ix = StateIndexer::new(nh, nw);
        let mut seen = vec![false; ix.dim()];
        seen[0] = true;
        seen[1] = true;
        for layer in Layer::BOTH {
            let n = ix.n_max(layer);
            prop_assert_eq!(ix.block_len(layer), (n * (n + 1) / 2).saturating_sub(1));
            for (s, i) in ix.compositions(layer) {
                let k = ix.index(layer, s, i).unwrap();
                prop_assert!(!seen[k]);
                seen[k] = true;
                prop_assert_eq!(k - ix.block_offset(layer) + 1, StateIndexer::rank(s, i));
            }
        }
        prop_assert!(seen.into_iter().all(|x| x));
    }

    #[test]
    fn initial_susceptible_weight(p in reduced_params(), eps in 0.0f64..=1.0) {
        let m = ReducedModel::new(p.clone()).unwrap();
        let y = m.initial_condition(eps).unwrap();
        for layer in Layer::BOTH {
            let d = p.dist(layer);
            let weight: f64 = m
                .indexer()
                .compositions(layer)
                .map(|(s, i)| s as f64 * y[m.indexer().index(layer, s, i).unwrap()])
                .sum();
            prop_assert!((weight - (d.mean() - d.prob(1)) * (1.0 - eps)).abs() < 1e-12);
            let mass: f64 = d.support().map(|(n, q)| q * (1.0 - eps.powi(n as i32))).sum::<f64>() - d.prob(1) * (1.0 - eps);
            prop_assert!((m.structure_mass(&y, layer) - mass).abs() < 1e-12);
        }
        prop_assert!(m.check_v(&y, 1e-12).passed());
    }

    #[test]
    fn vector_field_identities(p in reduced_params(), seed in any::<u64>()) {
        let m = ReducedModel::new(p.clone()).unwrap();
        let y = interior_point(&m, seed);
        prop_assert!(m.check_v(&y, 0.0).passed());
        let dy = m.rhs_vec(&y).unwrap();
        prop_assert!((dy[0] + dy[1] + p.gamma * y[1]).abs() < 1e-12);
        for layer in Layer::BOTH {
            prop_assert!(m.delta_identity_residual(&y, layer).unwrap().abs() < 1e-10);
            let balance = m.structure_mass(&dy, layer) + p.gamma * m.n_one_one(&y, layer)
                + m.last_susceptible_outflow(&y, layer);
            prop_assert!(balance.abs() < 1e-10, "{}", balance);
        }
    }

    #[test]
    fn layer_relabelling(p in reduced_params(), seed in any::<u64>()) {
        let m = ReducedModel::new(p.clone()).unwrap();
        let sw = ReducedModel::new(p.swapped()).unwrap();
        let y = interior_point(&m, seed);
        let mut z = vec![0.0; sw.dim()];
        z[0] = y[0];
        z[1] = y[1];
        for (from, to) in [(Layer::Household, Layer::Workplace), (Layer::Workplace, Layer::Household)] {
            for (s, i) in m.indexer().compositions(from) {
                z[sw.indexer().index(to, s, i).unwrap()] = y[m.indexer().index(from, s, i).unwrap()];
            }
        }
        let (dy, dz) = (m.rhs_vec(&y).unwrap(), sw.rhs_vec(&z).unwrap());
        prop_assert_eq!(dy[0], dz[0]);
        prop_assert_eq!(dy[1], dz[1]);
        for (from, to) in [(Layer::Household, Layer::Workplace), (Layer::Workplace, Layer::Household)] {
            for (s, i) in m.indexer().compositions(from) {
                let a = dy[m.indexer().index(from, s, i).unwrap()];
                let b = dz[sw.indexer().index(to, s, i).unwrap()];
                prop_assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn fenwick_matches_linear_scan(
        weights in prop::collection::vec(0u64..50, 1..64),
        updates in prop::collection::vec((any::<prop::sample::Index>(), 0u64..50), 0..32),
    ) {
        let mut w = weights.clone();
        let mut f = FenwickSampler::new(weights);
        for (ix, v) in updates {
            let k = ix.index(w.len());
            w[k] = v;
            f.set(k, v);
        }
        prop_assert_eq!(f.total(), w.iter().sum::<u64>());
        for end in 0..=w.len() {
            prop_assert_eq!(f.prefix_sum(end), w[..end].iter().sum::<u64>());
        }
        for target in 0..f.total() {
            let k = f.find(target);
            prop_assert!(w[..k].iter().sum::<u64>() <= target && target < w[..=k].iter().sum::<u64>());
        }
    }

    #[test]
    fn graphs_satisfy_structural_invariants(k in 1usize..400, h in size_dist(6), w in size_dist(15), seed in any::<u64>()) {
        let g = PopulationGraph::build(k, &h, &w, &mut stream(seed, 0)).unwrap();
        prop_assert!(g.validate([h.n_max(), w.n_max()]).is_ok());
        for (layer, d) in [(Layer::Household, &h), (Layer::Workplace, &w)] {
            let part = g.layer(layer);
            prop_assert_eq!(part.sizes().sum::<usize>(), k);
            prop_assert!(part.len() * d.n_max() >= k && part.len() <= k);
        }
    }

    #[test]
    fn alignment_and_distances(values in prop::collection::vec(0.0f64..0.5, 3..40), level in 0.01f64..0.4) {
        let t: Vec<f64> = (0..values.len()).map(|k| k as f64).collect();
        let s: Vec<f64> = values.iter().map(|i| 1.0 - i).collect();
        let c = Curve::new(t, s, values).unwrap();
        prop_assert_eq!(sup_distance(&c, &c, Component::I).unwrap(), 0.0);
        if let Ok(once) = align_by_threshold(std::slice::from_ref(&c), level) {
            let twice = align_by_threshold(&once, level).unwrap();
            prop_assert_eq!(&once, &twice);
            // A curve already above the level is aligned at its own start.
            let expected = if c.i[0] < level { level } else { c.i[0] };
            prop_assert_eq!(once[0].value_at(Component::I, 0.0), Some(expected));
        }
        let shifted = c.shifted(0.5);
        let d1 = sup_distance(&c, &shifted, Component::S).unwrap();
        let d2 = sup_distance(&shifted, &c, Component::S).unwrap();
        prop_assert!((d1 - d2).abs() < 1e-15);
    }
}
