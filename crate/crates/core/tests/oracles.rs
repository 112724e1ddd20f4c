//! Checks against independently computed reference values.

use dcs_core::cover::{Cover, DiscreteCover, LinkedCover, Region};
use dcs_core::diagnostics::{
    autocorrelation, chi_square_gof, ks_distance, stationary_distribution, stationary_error, tv_discrete, variance,
};
use dcs_core::expectation::{batch_means_stderr, estimate_expectation, Integrand};
use dcs_core::merge::{merge, merge_weighted};
use dcs_core::pmmh::{pf_loglik, simulate_sv, PfConfig, ReturnSeries, SVParams};
use dcs_core::proportion::{estimate_proportions, true_proportions_discrete};
use dcs_core::rng::{derive_seed, seeded};
use dcs_core::samplers::{gamma_envelope, subset_mh, subset_rejection, Proposal, SubsetChainConfig, SubsetSample};
use dcs_core::target::{seven_state_matrix, DiscreteChain, Gamma, Target, TransitionKernel};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Composite Simpson rule on `[a, b]` with `n` (even) intervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn gamma_pdf(k: f64, x: f64) -> f64 {
    // Independent of the crate's own density: Γ(k) for integer k by factorial.
    let g: f64 = (1..k as u64).map(|i| i as f64).product();
    x.powf(k - 1.0) * (-x).exp() / g
}

/// `E[X | lo ≤ X ≤ hi]` for gamma(k, 1) by quadrature.
fn truncated_gamma_mean(k: f64, lo: f64, hi: f64) -> f64 {
    let mass = simpson(|x| gamma_pdf(k, x), lo, hi, 200_000);
    simpson(|x| x * gamma_pdf(k, x), lo, hi, 200_000) / mass
}

fn eq1_cover() -> LinkedCover {
    LinkedCover::linked(
        Region::interval(0.0, f64::INFINITY),
        vec![Region::interval(0.0, 3.55), Region::interval(3.45, 7.55), Region::interval(7.45, f64::INFINITY)],
    )
    .unwrap()
}

#[test]
fn restricted_mh_matches_truncated_mean() {
    let g = Gamma::new(4.0, 1.0).unwrap();
    let cover = eq1_cover();
    let cfg = SubsetChainConfig::new(0, Proposal::RandomWalk { scale: vec![0.71] }, 10_000, 21).with_burn_in(500);
    let s = subset_mh(&g, &cover, &cfg).unwrap();
    let xs: Vec<f64> = s.rows().map(|x| x[0]).collect();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let truth = truncated_gamma_mean(4.0, 0.0, 3.55);
    let se = batch_means_stderr(&xs);
    assert!((mean - truth).abs() < 4.0 * se, "mean {mean} truth {truth} se {se}");
}

#[test]
fn tail_rejection_matches_truncated_mean() {
    let g = Gamma::new(4.0, 1.0).unwrap();
    let cover = eq1_cover();
    let env = gamma_envelope(&g, cover.part(2)).unwrap();
    let s = subset_rejection(&g, env.as_ref(), &cover, 2, 10_000, 5).unwrap();
    let xs: Vec<f64> = s.rows().map(|x| x[0]).collect();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let truth = truncated_gamma_mean(4.0, 7.45, 80.0);
    let se = (variance(&xs) / xs.len() as f64).sqrt();
    assert!((mean - truth).abs() < 2.0 * se, "mean {mean} truth {truth} se {se}");
}

#[test]
fn rejection_draws_pass_chi_square_against_truncated_cdf() {
    let g = Gamma::new(4.0, 1.0).unwrap();
    let cover = eq1_cover();
    for part in 0..3 {
        let region = cover.part(part);
        let env = gamma_envelope(&g, region).unwrap();
        let s = subset_rejection(&g, env.as_ref(), &cover, part, 10_000, 100 + part as u64).unwrap();
        let (lo, hi) = (region.lo()[0], region.hi()[0].min(40.0));
        let bins = 20;
        let edges: Vec<f64> = (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect();
        let cdf = |x: f64| g.cdf(x).unwrap();
        let mass = cdf(hi) - cdf(lo);
        let probs: Vec<f64> = edges.windows(2).map(|e| (cdf(e[1]) - cdf(e[0])) / mass).collect();
        let mut counts = vec![0u64; bins];
        for x in s.rows() {
            let i = (((x[0] - lo) / (hi - lo)) * bins as f64).floor() as usize;
            counts[i.min(bins - 1)] += 1;
        }
        let t = chi_square_gof(&counts, &probs).unwrap();
        assert!(t.p_value > 0.001, "part {part}: {t:?}");
    }
}

#[test]
fn restricted_three_state_chain_has_restricted_stationary_law() {
    // Target on {0,1,2,3}; part {0,1,2}. Restricted law is the renormalized target.
    let probs = [0.1, 0.2, 0.3, 0.4];
    struct Finite([f64; 4]);
    impl Target for Finite {
        fn name(&self) -> &str {
            "finite"
        }
        fn dim(&self) -> usize {
            1
        }
        fn ln_density(&self, x: &[f64]) -> f64 {
            let v = x[0];
            if (0.0..4.0).contains(&v) && v.fract() == 0.0 {
                self.0[v as usize].ln()
            } else {
                f64::NEG_INFINITY
            }
        }
        fn support(&self) -> Region {
            Region::interval(0.0, 3.0)
        }
        fn is_lattice(&self) -> bool {
            true
        }
    }
    let target = Finite(probs);
    let cover = DiscreteCover::linked(4, vec![vec![0, 1, 2], vec![2, 3]]).unwrap();
    let m = 100_000;
    let cfg = SubsetChainConfig::new(0, Proposal::NearestNeighbor, m, 3).with_burn_in(1000);
    let s = subset_mh(&target, &cover, &cfg).unwrap();

    // Oracle: stationary vector of the restricted MH kernel, by linear solve.
    let mut p = vec![vec![0.0; 3]; 3];
    for i in 0..3usize {
        for d in [-1i64, 1] {
            let j = i as i64 + d;
            if (0..3).contains(&j) {
                let j = j as usize;
                p[i][j] = 0.5 * (probs[j] / probs[i]).min(1.0);
            }
        }
        p[i][i] = 1.0 - p[i].iter().sum::<f64>();
    }
    let lambda = stationary_distribution(&p).unwrap();
    let counts: Vec<f64> = (0..3).map(|k| s.rows().filter(|x| x[0] == k as f64).count() as f64 / m as f64).collect();
    for k in 0..3 {
        let series: Vec<f64> = s.rows().map(|x| (x[0] == k as f64) as u8 as f64).collect();
        let se = batch_means_stderr(&series);
        assert!((counts[k] - lambda[k]).abs() < 3.0 * se.max(1e-3), "state {k}: {} vs {}", counts[k], lambda[k]);
    }
}

#[test]
fn stationary_law_of_nice_chain_matches_long_run() {
    let a = 0.03;
    let p = seven_state_matrix(a);
    let lambda = stationary_distribution(&p).unwrap();
    assert!(stationary_error(&p, &lambda) <= 1e-12);
    let kernel = TransitionKernel::new(p).unwrap();
    let mut rng = seeded(77);
    let n = 10_000_000;
    let mut state = 0;
    let mut counts = [0u64; 7];
    for _ in 0..n {
        state = kernel.propose(state, &mut rng);
        counts[state] += 1;
    }
    // Batch means over the indicator chain would be costly at this length;
    // a conservative bound inflates the binomial error by the slowest mixing time.
    for s in 0..7 {
        let f = counts[s] as f64 / n as f64;
        let se = (lambda[s] * (1.0 - lambda[s]) / n as f64).sqrt() * (2.0 / a).sqrt();
        assert!((f - lambda[s]).abs() < 3.0 * se, "state {s}: {f} vs {}", lambda[s]);
    }
}

#[test]
fn iid_tv_within_binomial_bound() {
    let chain = DiscreteChain::seven_state(0.03).unwrap();
    let lambda = chain.stationary().unwrap().to_vec();
    let mut rng = seeded(5);
    let n = 1_000_000;
    let draws: Vec<usize> = (0..n).map(|_| chain.sample_exact(&mut rng).unwrap()[0] as usize).collect();
    let tv = tv_discrete(&draws, &lambda).unwrap().tv;
    let bound = 3.0 * (lambda.iter().map(|l| l * (1.0 - l)).fold(0.0, f64::max) / n as f64).sqrt();
    assert!(tv <= bound, "{tv} > {bound}");
}

#[test]
fn ar1_autocorrelation() {
    let mut rng = seeded(13);
    let n = 200_000;
    let mut x = 0.0;
    let series: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            x = 0.9 * x + z;
            x
        })
        .collect();
    let r = autocorrelation(&series, 5).unwrap();
    for k in 1..=5 {
        assert!((r[k] - 0.9f64.powi(k as i32)).abs() < 0.02, "lag {k}: {}", r[k]);
    }
    let iid: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
    assert!(autocorrelation(&iid, 1).unwrap()[1].abs() < 3.0 / (100_000f64).sqrt());
}

#[test]
fn ks_distance_dkw_calibration() {
    // DKW: P(D > ε) ≤ 2 exp(-2 n ε²) = 2e-8 at n = 10^4, ε = 0.02.
    let mut rng = seeded(3);
    for rep in 0..20 {
        let xs: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let d = ks_distance(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(d <= 0.02, "rep {rep}: {d}");
    }
}

/// Marginal density of `Y_1` by two-dimensional quadrature over `(X_0, w_1)`.
fn one_step_likelihood(p: &SVParams, y: f64) -> f64 {
    let sd0 = p.sigma / (1.0 - p.phi * p.phi).sqrt();
    let norm = |x: f64, m: f64, v: f64| (-(x - m) * (x - m) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
    simpson(
        |x0| {
            norm(x0, 0.0, sd0 * sd0)
                * simpson(
                    |w| {
                        let x1 = p.phi * x0 + p.sigma * w;
                        let h = (0.5 * x1).exp();
                        norm(w, 0.0, 1.0) * norm(y, p.beta * h * p.rho * w, p.beta * p.beta * h * h * (1.0 - p.rho * p.rho))
                    },
                    -8.0,
                    8.0,
                    400,
                )
        },
        -8.0 * sd0,
        8.0 * sd0,
        400,
    )
}

#[test]
fn one_step_filter_matches_quadrature() {
    let p = SVParams::new(0.8, 0.7, -0.4, 0.5).unwrap();
    let y = ReturnSeries::new(vec![0.9]).unwrap();
    let exact = one_step_likelihood(&p, 0.9);
    let reps = 200;
    let ests: Vec<f64> = (0..reps)
        .map(|r| pf_loglik(&p, &y, &PfConfig::new(1000, derive_seed(1, r))).unwrap().exp())
        .collect();
    let mean = ests.iter().sum::<f64>() / reps as f64;
    let se = (variance(&ests) / reps as f64).sqrt();
    assert!((mean - exact).abs() < 3.0 * se + 1e-12, "{mean} vs {exact} (se {se})");
}

#[test]
fn loglik_variance_shrinks_with_particles() {
    let p = SVParams::new(0.9, 0.7, -0.3, 0.3).unwrap();
    let (_, y) = simulate_sv(&p, 100, 8).unwrap();
    let var_at = |n: usize| {
        let v: Vec<f64> = (0..60).map(|r| pf_loglik(&p, &y, &PfConfig::new(n, derive_seed(2, r))).unwrap()).collect();
        variance(&v)
    };
    let (v1, v2, v4) = (var_at(50), var_at(100), var_at(200));
    assert!(v1 > v2 && v2 > v4, "{v1} {v2} {v4}");
}

#[test]
fn simulated_returns_are_heavy_tailed() {
    let p = SVParams::new(0.9, 0.7, -0.3, 0.3).unwrap();
    let (_, y) = simulate_sv(&p, 10_000, 4).unwrap();
    let v = y.values();
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let m2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
    let m4 = v.iter().map(|x| (x - m).powi(4)).sum::<f64>() / v.len() as f64;
    // Moment formula: kurtosis = 3 exp(Var X) with Var X = σ²/(1-φ²).
    let theory = 3.0 * (0.09f64 / 0.19).exp();
    let kurt = m4 / (m2 * m2);
    assert!(kurt > 3.0, "{kurt}");
    assert!((kurt - theory).abs() < 1.0, "{kurt} vs {theory}");
}

#[test]
fn collapsed_state_variance() {
    let p = SVParams::new(0.0, 0.7, 0.0, 1e-9).unwrap();
    let (_, y) = simulate_sv(&p, 20_000, 6).unwrap();
    assert!((variance(y.values()) - 0.49).abs() < 0.02);
}

/// Exact i.i.d. draws from the seven-state law restricted to each part.
fn exact_discrete_samples(lambda: &[f64], cover: &DiscreteCover, m: usize, seed: u64) -> Vec<SubsetSample> {
    (0..cover.len())
        .map(|j| {
            let states: Vec<usize> = cover.parts()[j].clone();
            let w: Vec<f64> = states.iter().map(|&s| lambda[s]).collect();
            let dist = rand::distr::weighted::WeightedIndex::new(&w).unwrap();
            let mut rng = seeded(derive_seed(seed, j as u64));
            let draws = (0..m).map(|_| states[dist.sample(&mut rng)] as f64).collect();
            SubsetSample::from_draws(cover, j, draws, 1.0, seed).unwrap()
        })
        .collect()
}

#[test]
fn merged_exact_discrete_draws_converge() {
    let chain = DiscreteChain::seven_state(0.03).unwrap();
    let lambda = chain.stationary().unwrap().to_vec();
    let cover = DiscreteCover::linked(7, vec![vec![0, 1, 2, 3], vec![3, 4, 5, 6]]).unwrap();
    let samples = exact_discrete_samples(&lambda, &cover, 150_000, 1);
    let props = estimate_proportions(&samples, &cover).unwrap();
    let merged = merge(&samples, &props, 2).unwrap();
    assert!(merged.len() >= 100_000);
    let states: Vec<usize> = merged.rows().map(|x| x[0] as usize).collect();
    assert!(tv_discrete(&states, &lambda).unwrap().tv <= 0.01);
}

#[test]
fn kept_counts_match_expectation() {
    let chain = DiscreteChain::seven_state(0.03).unwrap();
    let lambda = chain.stationary().unwrap().to_vec();
    let cover = DiscreteCover::linked(7, vec![vec![0, 1, 2, 3], vec![3, 4, 5, 6]]).unwrap();
    let truth = true_proportions_discrete(&lambda, &cover).unwrap();
    let m = 50_000;
    let samples = exact_discrete_samples(&lambda, &cover, m, 9);
    let props = estimate_proportions(&samples, &cover).unwrap();
    let merged = merge(&samples, &props, 4).unwrap();
    let max = props.pi.iter().cloned().fold(0.0, f64::max);
    for j in 0..2 {
        // Given the estimated proportions the keep decisions are binomial.
        let p = props.pi[j] / max * (1.0 - props.prior_fraction[j]);
        let expect = m as f64 * p;
        let se = (m as f64 * p * (1.0 - p)).sqrt();
        assert!((merged.kept[j] as f64 - expect).abs() <= 3.0 * se.max(1.0), "part {j}");
        // And the target of the estimate is the exact exclusive mass, up to
        // the relative error of the hit-count ratio.
        let exact = m as f64 * truth.exclusive[j] / truth.pi.iter().cloned().fold(0.0, f64::max);
        let rel = (1.0 / props.hits[0][0] as f64 + 1.0 / props.hits[0][1] as f64).sqrt();
        assert!((merged.kept[j] as f64 - exact).abs() / exact < 4.0 * rel + 3.0 * se / exact, "part {j}");
    }
}

#[test]
fn discrete_expectation_oracle() {
    let chain = DiscreteChain::seven_state(0.03).unwrap();
    let lambda = chain.stationary().unwrap().to_vec();
    let cover = DiscreteCover::linked(7, vec![vec![0, 1, 2, 3], vec![3, 4, 5, 6]]).unwrap();
    let samples = exact_discrete_samples(&lambda, &cover, 100_000, 12);
    let props = estimate_proportions(&samples, &cover).unwrap();
    let cases = [
        (Integrand::coordinate(0), lambda.iter().enumerate().map(|(s, l)| s as f64 * l).sum::<f64>()),
        (Integrand::indicator(3), lambda[3]),
    ];
    for (h, truth) in cases {
        let e = estimate_expectation(&h, &samples, &props).unwrap();
        // The weight uncertainty is not in `stderr`; add the spread of the
        // weight estimate itself, from the hit counts.
        let w_se = props.exclusive[0] * (1.0 - props.exclusive[0]) * 2.0 / (props.hits[0][0] as f64).sqrt();
        let diff = e.per_part[0].mean - e.per_part[1].mean;
        let se = (e.stderr.powi(2) + (w_se * diff).powi(2)).sqrt();
        assert!((e.estimate - truth).abs() < 3.0 * se, "{}: {} vs {truth} (se {se})", h.name(), e.estimate);
    }
}

#[test]
fn expectation_is_linear_and_consistent_with_weighted_merge() {
    let g = Gamma::new(4.0, 1.0).unwrap();
    let cover = eq1_cover();
    let samples: Vec<SubsetSample> = (0..3)
        .map(|j| {
            let env = gamma_envelope(&g, cover.part(j)).unwrap();
            subset_rejection(&g, env.as_ref(), &cover, j, 20_000, 40 + j as u64).unwrap()
        })
        .collect();
    let props = estimate_proportions(&samples, &cover).unwrap();
    let h1 = Integrand::coordinate(0);
    let h2 = Integrand::power(0, 2);
    let comb = Integrand::new("2x - 0.5x^2", |x| 2.0 * x[0] - 0.5 * x[0] * x[0]);
    let e1 = estimate_expectation(&h1, &samples, &props).unwrap();
    let e2 = estimate_expectation(&h2, &samples, &props).unwrap();
    let ec = estimate_expectation(&comb, &samples, &props).unwrap();
    assert!((ec.estimate - (2.0 * e1.estimate - 0.5 * e2.estimate)).abs() < 1e-10);

    let merged = merge_weighted(&samples, &props, 60_000, 3).unwrap();
    let xs = merged.first_coordinate();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let se = (e1.stderr.powi(2) + variance(&xs) / xs.len() as f64).sqrt();
    assert!((mean - e1.estimate).abs() < 4.0 * se, "{mean} vs {}", e1.estimate);
}

#[test]
fn seven_state_laws_match_eigen_solve() {
    // Frozen from an independent dense eigen-decomposition of the transpose.
    let frozen = [
        (0.003, [0.27101945, 0.27101945, 0.27183495, 0.00163592, 0.00163592, 0.00163101, 0.1812233]),
        (0.03, [0.25591115, 0.25591115, 0.26382593, 0.01631913, 0.01631913, 0.01582956, 0.17588395]),
    ];
    for (a, expect) in frozen {
        let lambda = stationary_distribution(&seven_state_matrix(a)).unwrap();
        for (l, e) in lambda.iter().zip(expect) {
            assert!((l - e).abs() < 1e-7, "a = {a}: {l} vs {e}");
        }
    }
}
