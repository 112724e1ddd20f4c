//! Particle marginal Metropolis-Hastings for a stochastic volatility model.
//!
//! The model is
//!
//! ```text
//! Y_k = β exp(X_k / 2) u_k,     X_k = φ X_{k-1} + σ w_k,     corr(u_k, w_k) = ρ,
//! ```
//!
//! with `X_0` drawn from the stationary AR(1) law. Given `X_k` and `X_{k-1}`
//! the innovation `w_k` is known, so
//! `Y_k | X_k, X_{k-1} ~ N(β e^{X_k/2} ρ w_k, β² e^{X_k} (1 - ρ²))`.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cover::{LinkedCover, Region};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{derive_seed, seeded};
use crate::special::{ln_normal_pdf, log_sum_exp};

/// Parameter names in storage order.
pub const PARAM_NAMES: [&str; 4] = ["phi", "beta", "rho", "sigma"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SVParams {
    pub phi: f64,
    pub beta: f64,
    pub rho: f64,
    pub sigma: f64,
}

impl SVParams {
    pub fn new(phi: f64, beta: f64, rho: f64, sigma: f64) -> Result<Self> {
        let p = Self { phi, beta, rho, sigma };
        if !p.in_space() {
            return Err(Error::InvalidParameter(alloc::format!("{p:?} outside the parameter space")));
        }
        Ok(p)
    }

    /// `φ ∈ [0,1]`, `β > 0`, `ρ ∈ [-1,1]`, `σ > 0`.
    pub fn in_space(&self) -> bool {
        (0.0..=1.0).contains(&self.phi)
            && self.beta > 0.0
            && self.beta.is_finite()
            && (-1.0..=1.0).contains(&self.rho)
            && self.sigma > 0.0
            && self.sigma.is_finite()
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.phi, self.beta, self.rho, self.sigma]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self { phi: x[0], beta: x[1], rho: x[2], sigma: x[3] }
    }

    fn check_filterable(&self) -> Result<()> {
        if !self.in_space() {
            return Err(Error::InvalidParameter(alloc::format!("{self:?} outside the parameter space")));
        }
        if self.phi >= 1.0 {
            return Err(Error::InvalidParameter("φ = 1 has no stationary initial law".into()));
        }
        if self.rho.abs() >= 1.0 {
            return Err(Error::InvalidParameter("|ρ| = 1 makes the observation density degenerate".into()));
        }
        Ok(())
    }
}

/// Closed box of the parameter space.
pub fn parameter_space() -> Region {
    Region::new(vec![0.0, 0.0, -1.0, 0.0], vec![1.0, f64::INFINITY, 1.0, f64::INFINITY]).expect("valid box")
}

/// Log returns `Y_1..Y_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries(Vec<f64>);

impl ReturnSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("return series"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("return series has non-finite entries".into()));
        }
        Ok(Self(values))
    }

    /// Log returns of a price path.
    pub fn from_prices(prices: &[f64]) -> Result<Self> {
        if prices.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::InvalidParameter("prices must be positive".into()));
        }
        Self::new(prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Resampling scheme of the particle filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Resampling {
    #[default]
    Systematic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfConfig {
    pub particles: usize,
    pub resampling: Resampling,
    pub seed: u64,
}

impl PfConfig {
    pub const DEFAULT_PARTICLES: usize = 100;

    pub fn new(particles: usize, seed: u64) -> Self {
        Self { particles, resampling: Resampling::Systematic, seed }
    }
}

/// Simulates the hidden path `X_0..X_T` and the returns `Y_1..Y_T`.
pub fn simulate_sv(params: &SVParams, t: usize, seed: u64) -> Result<(Vec<f64>, ReturnSeries)> {
    params.check_filterable()?;
    if t == 0 {
        return Err(Error::InvalidParameter("series length must be at least 1".into()));
    }
    let mut rng = seeded(seed);
    let sd0 = params.sigma / (1.0 - params.phi * params.phi).sqrt();
    let mut x = Vec::with_capacity(t + 1);
    let z0: f64 = StandardNormal.sample(&mut rng);
    x.push(sd0 * z0);
    let c = (1.0 - params.rho * params.rho).sqrt();
    let mut y = Vec::with_capacity(t);
    for k in 1..=t {
        let w: f64 = StandardNormal.sample(&mut rng);
        let e: f64 = StandardNormal.sample(&mut rng);
        let u = params.rho * w + c * e;
        let xk = params.phi * x[k - 1] + params.sigma * w;
        x.push(xk);
        y.push(params.beta * (0.5 * xk).exp() * u);
    }
    Ok((x, ReturnSeries::new(y)?))
}

/// Systematic resampling: ancestor indices for `weights` (not normalized).
pub fn systematic_resample<R: Rng + ?Sized>(weights: &[f64], out: &mut Vec<usize>, rng: &mut R) {
    let n = weights.len();
    let total: f64 = weights.iter().sum();
    let step = total / n as f64;
    let mut u = rng.random::<f64>() * step;
    let mut acc = weights[0];
    let mut i = 0;
    out.clear();
    for _ in 0..n {
        while u > acc && i + 1 < n {
            i += 1;
            acc += weights[i];
        }
        out.push(i);
        u += step;
    }
}

/// Bootstrap particle filter estimate of `ln p(y_{1:T} | θ)`.
pub fn pf_loglik(params: &SVParams, data: &ReturnSeries, config: &PfConfig) -> Result<f64> {
    params.check_filterable()?;
    let n = config.particles;
    if n == 0 {
        return Err(Error::InvalidParameter("particle count must be at least 1".into()));
    }
    let SVParams { phi, beta, rho, sigma } = *params;
    let mut rng = seeded(config.seed);
    let sd0 = sigma / (1.0 - phi * phi).sqrt();
    let mut x: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sd0 * z
        })
        .collect();
    let mut next = vec![0.0; n];
    let mut ln_w = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut ancestors = Vec::with_capacity(n);
    let var_scale = beta * beta * (1.0 - rho * rho);
    let mut loglik = 0.0;
    let ys = data.values();
    for (k, &y) in ys.iter().enumerate() {
        for i in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            let xk = phi * x[i] + sigma * z;
            next[i] = xk;
            let h = (0.5 * xk).exp();
            ln_w[i] = ln_normal_pdf(y, beta * h * rho * z, var_scale * h * h);
        }
        let lse = log_sum_exp(&ln_w);
        if !lse.is_finite() {
            return Err(Error::WeightsVanished { step: k + 1 });
        }
        loglik += lse - (n as f64).ln();
        if k + 1 < ys.len() {
            let max = ln_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            w.iter_mut().zip(&ln_w).for_each(|(w, l)| *w = (l - max).exp());
            systematic_resample(&w, &mut ancestors, &mut rng);
            for (xi, &a) in x.iter_mut().zip(&ancestors) {
                *xi = next[a];
            }
        }
    }
    Ok(loglik)
}

/// Independent priors on the four parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvPrior {
    pub beta_mean: f64,
    pub sigma_mean: f64,
}

impl Default for SvPrior {
    /// `φ ~ U[0,1]`, `β ~ Exp(mean 1)`, `ρ ~ U[-1,1]`, `σ ~ Exp(mean 0.5)`.
    fn default() -> Self {
        Self { beta_mean: 1.0, sigma_mean: 0.5 }
    }
}

impl SvPrior {
    pub fn ln_density(&self, p: &SVParams) -> f64 {
        if !p.in_space() {
            return f64::NEG_INFINITY;
        }
        -(2.0).ln() - self.beta_mean.ln() - p.beta / self.beta_mean - self.sigma_mean.ln() - p.sigma / self.sigma_mean
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SVParams {
        let e1: f64 = rand_distr::Exp1.sample(rng);
        let e2: f64 = rand_distr::Exp1.sample(rng);
        SVParams {
            phi: rng.random(),
            beta: self.beta_mean * e1,
            rho: 2.0 * rng.random::<f64>() - 1.0,
            sigma: self.sigma_mean * e2,
        }
    }
}

/// Settings of one PMMH run.
#[derive(Debug, Clone, PartialEq)]
pub struct PmmhConfig {
    pub steps: usize,
    pub particles: usize,
    pub prior: SvPrior,
    /// Random-walk covariance over `(φ, β, ρ, σ)`.
    pub proposal_cov: Vec<Vec<f64>>,
    /// Box the chain is confined to, intersected with the parameter space.
    pub restriction: Region,
    pub start: Option<SVParams>,
    pub seed: u64,
}

impl PmmhConfig {
    pub fn new(steps: usize, seed: u64) -> Self {
        Self {
            steps,
            particles: PfConfig::DEFAULT_PARTICLES,
            prior: SvPrior::default(),
            proposal_cov: fallback_covariance(),
            restriction: parameter_space(),
            start: None,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmmhChain {
    pub states: Vec<SVParams>,
    /// Stored log-likelihood estimate of each state.
    pub loglik: Vec<f64>,
    pub accepted: Vec<bool>,
}

impl PmmhChain {
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted.iter().filter(|&&a| a).count() as f64 / self.accepted.len().max(1) as f64
    }

    /// Values of parameter `d` (0 = φ, 1 = β, 2 = ρ, 3 = σ).
    pub fn column(&self, d: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.to_array()[d]).collect()
    }
}

/// Diagonal `(0.02, 0.05, 0.05, 0.02)²` covariance.
pub fn fallback_covariance() -> Vec<Vec<f64>> {
    let sd = [0.02, 0.05, 0.05, 0.02];
    (0..4).map(|i| (0..4).map(|j| if i == j { sd[i] * sd[i] } else { 0.0 }).collect()).collect()
}

/// Empirical covariance of a pilot chain scaled by `2.38² / 4`; the fallback
/// is returned for chains too short or degenerate to estimate it.
pub fn pilot_covariance(states: &[SVParams]) -> Vec<Vec<f64>> {
    let n = states.len();
    if n < 10 {
        return fallback_covariance();
    }
    let rows: Vec<[f64; 4]> = states.iter().map(|s| s.to_array()).collect();
    let mean: Vec<f64> = (0..4).map(|d| rows.iter().map(|r| r[d]).sum::<f64>() / n as f64).collect();
    let scale = 2.38 * 2.38 / 4.0;
    let cov: Vec<Vec<f64>> = (0..4)
        .map(|i| {
            (0..4)
                .map(|j| scale * rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / (n - 1) as f64)
                .collect()
        })
        .collect();
    if (0..4).any(|d| !(cov[d][d] > 0.0)) {
        return fallback_covariance();
    }
    cov
}

fn admissible(p: &SVParams, restriction: &Region) -> bool {
    p.in_space() && p.phi < 1.0 && p.rho.abs() < 1.0 && restriction.covers(&p.to_array())
}

/// Random-walk PMMH over `(φ, β, ρ, σ)` confined to `config.restriction`.
///
/// Proposals outside the restriction are rejected without running the filter,
/// and the current state keeps its stored likelihood estimate. A zero
/// proposal covariance never moves the chain and never re-runs the filter.
pub fn pmmh_chain(data: &ReturnSeries, config: &PmmhConfig) -> Result<PmmhChain> {
    if config.steps == 0 {
        return Err(Error::InvalidParameter("steps must be at least 1".into()));
    }
    if config.restriction.dim() != 4 || config.proposal_cov.len() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: config.restriction.dim().min(config.proposal_cov.len()) });
    }
    let chol = linalg::cholesky(&config.proposal_cov)?;
    let frozen = chol.iter().all(|row| row.iter().all(|&v| v == 0.0));
    let mut rng = seeded(derive_seed(config.seed, 0));
    let pf = |p: &SVParams, it: u64| {
        pf_loglik(p, data, &PfConfig::new(config.particles, derive_seed(config.seed, it + 1)))
    };

    // Start at the given point, the anchor of the restriction, or a prior draw inside it.
    let mut start_candidates = Vec::new();
    if let Some(s) = config.start {
        start_candidates.push(s);
    } else {
        let region = config.restriction.intersection(&parameter_space());
        start_candidates.push(SVParams::from_slice(&region.anchor(&[0.1, config.prior.beta_mean, 0.1, config.prior.sigma_mean])));
        for _ in 0..1000 {
            let p = config.prior.sample(&mut rng);
            if admissible(&p, &config.restriction) {
                start_candidates.push(p);
                if start_candidates.len() > 20 {
                    break;
                }
            }
        }
    }
    let mut current = None;
    for p in start_candidates {
        if !admissible(&p, &config.restriction) {
            continue;
        }
        if let Ok(l) = pf(&p, u64::MAX - 1) {
            if l.is_finite() {
                current = Some((p, l));
                break;
            }
        }
    }
    let (mut x, mut ll) = current.ok_or(Error::Initialization { part: 0 })?;
    let mut ln_prior = config.prior.ln_density(&x);

    let mut chain = PmmhChain {
        states: Vec::with_capacity(config.steps),
        loglik: Vec::with_capacity(config.steps),
        accepted: Vec::with_capacity(config.steps),
    };
    for it in 0..config.steps {
        let mut accepted = false;
        if !frozen {
            let z: Vec<f64> = (0..4).map(|_| StandardNormal.sample(&mut rng)).collect();
            let step = linalg::lower_mul(&chol, &z);
            let arr = x.to_array();
            let y = SVParams::from_slice(&[arr[0] + step[0], arr[1] + step[1], arr[2] + step[2], arr[3] + step[3]]);
            let ln_u = rng.random::<f64>().ln();
            if admissible(&y, &config.restriction) {
                let ln_prior_y = config.prior.ln_density(&y);
                if let Ok(ll_y) = pf(&y, it as u64) {
                    if ln_u < ll_y + ln_prior_y - ll - ln_prior {
                        x = y;
                        ll = ll_y;
                        ln_prior = ln_prior_y;
                        accepted = true;
                    }
                }
            }
        }
        chain.states.push(x);
        chain.loglik.push(ll);
        chain.accepted.push(accepted);
    }
    Ok(chain)
}

/// Two-part cover of the parameter space split in `φ` at `0.55 ± 0.01`.
pub fn sv_cover() -> LinkedCover {
    let space = parameter_space();
    let part = |lo: f64, hi: f64| {
        Region::new(vec![lo, 0.0, -1.0, 0.0], vec![hi, f64::INFINITY, 1.0, f64::INFINITY]).expect("valid box")
    };
    LinkedCover::linked(space, vec![part(0.0, 0.56), part(0.54, 1.0)]).expect("overlapping parts")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::Cover;

    #[test]
    fn cover_split() {
        let c = sv_cover();
        let d = c.adjacent_overlap(0);
        assert_eq!((d.lo()[0], d.hi()[0]), (0.54, 0.56));
        assert!(c.part_contains(0, &[0.55, 1.0, 0.0, 0.5]) && c.part_contains(1, &[0.55, 1.0, 0.0, 0.5]));
        assert!(c.part_contains(0, &[0.3, 1.0, 0.0, 0.5]) && !c.part_contains(1, &[0.3, 1.0, 0.0, 0.5]));
    }

    #[test]
    fn parameter_validation() {
        assert!(SVParams::new(1.2, 1.0, 0.0, 0.1).is_err());
        assert!(SVParams::new(0.5, 0.0, 0.0, 0.1).is_err());
        let unit_phi = SVParams::new(1.0, 1.0, 0.0, 0.1).unwrap();
        assert!(simulate_sv(&unit_phi, 10, 0).is_err());
        let data = ReturnSeries::new(vec![0.1]).unwrap();
        let unit_rho = SVParams::new(0.5, 1.0, 1.0, 0.1).unwrap();
        assert!(pf_loglik(&unit_rho, &data, &PfConfig::new(10, 0)).is_err());
    }

    #[test]
    fn collapsed_state_gives_iid_normal_likelihood() {
        let p = SVParams::new(0.0, 0.7, 0.0, 1e-12).unwrap();
        let (x, y) = simulate_sv(&p, 50, 3).unwrap();
        assert!(x.iter().all(|v| v.abs() < 1e-10));
        let exact: f64 = y.values().iter().map(|&v| ln_normal_pdf(v, 0.0, 0.49)).sum();
        let est = pf_loglik(&p, &y, &PfConfig::new(1, 9)).unwrap();
        assert!((est - exact).abs() < 1e-8);
    }

    #[test]
    fn systematic_resampling_counts() {
        let mut out = Vec::new();
        let mut rng = seeded(1);
        systematic_resample(&[1.0, 0.0, 3.0, 0.0], &mut out, &mut rng);
        assert_eq!(out.iter().filter(|&&a| a == 0).count(), 1);
        assert_eq!(out.iter().filter(|&&a| a == 2).count(), 3);
    }

    #[test]
    fn frozen_proposal_never_moves() {
        let p = SVParams::new(0.5, 0.7, -0.3, 0.3).unwrap();
        let (_, y) = simulate_sv(&p, 30, 2).unwrap();
        let mut cfg = PmmhConfig::new(20, 5);
        cfg.proposal_cov = vec![vec![0.0; 4]; 4];
        cfg.start = Some(p);
        let chain = pmmh_chain(&y, &cfg).unwrap();
        assert!(chain.states.iter().all(|s| *s == p));
        assert!(chain.loglik.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(chain.acceptance_rate(), 0.0);
    }

    #[test]
    fn restricted_chain_respects_split() {
        let p = SVParams::new(0.6, 0.7, -0.3, 0.3).unwrap();
        let (_, y) = simulate_sv(&p, 50, 4).unwrap();
        let mut cfg = PmmhConfig::new(300, 6);
        cfg.particles = 30;
        cfg.restriction = sv_cover().part(0).clone();
        let chain = pmmh_chain(&y, &cfg).unwrap();
        assert!(chain.states.iter().all(|s| s.phi <= 0.56));
        assert!(chain.acceptance_rate() > 0.0 && chain.acceptance_rate() < 1.0);
    }

    #[test]
    fn log_returns_from_prices() {
        let r = ReturnSeries::from_prices(&[1.0, core::f64::consts::E]).unwrap();
        assert!((r.values()[0] - 1.0).abs() < 1e-15);
        assert!(ReturnSeries::new(vec![f64::NAN]).is_err());
    }
}
