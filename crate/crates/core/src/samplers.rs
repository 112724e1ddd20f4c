//! Samplers restricted to one part of a cover.
//!
//! Restricting a sampler to `C_j` only requires rejecting anything that falls
//! outside `C_j`: for Metropolis-Hastings the acceptance ratio picks up the
//! indicator, and for rejection sampling `π(·|C_j) ≤ π(·)/π(C_j)` so the
//! same envelope still dominates.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::cover::{Cover, Region};
use crate::error::{Error, Result};
use crate::rng::{seeded, stream, stream_rng};
use crate::target::{Gamma, Target, TransitionKernel};

/// Attempts spent looking for a starting point with positive density.
pub const INIT_ATTEMPTS: usize = 10_000;

/// Proposal of a subset-restricted Metropolis-Hastings chain.
#[derive(Debug, Clone, PartialEq)]
pub enum Proposal {
    /// Gaussian random walk with per-dimension standard deviations. On lattice
    /// targets the proposal is rounded to the nearest integer point.
    RandomWalk { scale: Vec<f64> },
    /// Symmetric ±1 step in one uniformly chosen coordinate.
    NearestNeighbor,
    /// The transition kernel itself. Moves are accepted with probability one,
    /// so the kernel must be reversible with respect to the target.
    Kernel(TransitionKernel),
}

/// Default random-walk scale: a fifth of each side of `region`, with
/// infinite sides replaced by `tail_sd`.
pub fn default_scale(region: &Region, tail_sd: &[f64]) -> Vec<f64> {
    region
        .lo()
        .iter()
        .zip(region.hi())
        .zip(tail_sd)
        .map(|((l, h), sd)| {
            let w = 0.2 * (h - l);
            if w.is_finite() {
                w.min(*sd).max(f64::MIN_POSITIVE)
            } else {
                *sd
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetChainConfig {
    pub part: usize,
    pub proposal: Proposal,
    /// Number of retained draws `M`.
    pub length: usize,
    /// Iterations discarded before the retained draws.
    pub burn_in: usize,
    pub seed: u64,
    /// Starting point; chosen automatically when `None`.
    pub start: Option<Vec<f64>>,
}

impl SubsetChainConfig {
    pub fn new(part: usize, proposal: Proposal, length: usize, seed: u64) -> Self {
        Self { part, proposal, length, burn_in: 0, seed, start: None }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_start(mut self, start: Vec<f64>) -> Self {
        self.start = Some(start);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::InvalidParameter("chain length must be at least 1".into()));
        }
        if self.burn_in >= self.length {
            return Err(Error::InvalidParameter("burn-in must be shorter than the chain".into()));
        }
        if let Proposal::RandomWalk { scale } = &self.proposal {
            if scale.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
                return Err(Error::InvalidParameter("random-walk scale must be finite and nonnegative".into()));
            }
        }
        Ok(())
    }
}

/// Draws from one part together with their overlap memberships.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetSample {
    pub part: usize,
    pub dim: usize,
    /// Row-major draws, `len() * dim` values.
    pub draws: Vec<f64>,
    /// Draw lies in `Δ_{1:j-1}`, the overlap with any earlier part.
    pub prior_overlap: Vec<bool>,
    /// Draw lies in `Δ_j = C_j ∩ C_{j+1}`.
    pub next_overlap: Vec<bool>,
    /// Draws in `Δ_{j-1} = C_{j-1} ∩ C_j`.
    pub hits_prev: usize,
    /// Draws in `Δ_j`.
    pub hits_next: usize,
    pub acceptance_rate: f64,
    pub seed: u64,
}

impl SubsetSample {
    /// Wraps raw draws, computing overlap flags and hit counts from `cover`.
    /// Fails if a draw lies outside the part.
    pub fn from_draws<C: Cover + ?Sized>(
        cover: &C,
        part: usize,
        draws: Vec<f64>,
        acceptance_rate: f64,
        seed: u64,
    ) -> Result<Self> {
        if part >= cover.len() {
            return Err(Error::PartOutOfRange { index: part, parts: cover.len() });
        }
        let dim = cover.dim();
        if draws.len() % dim != 0 {
            return Err(Error::DimensionMismatch { expected: dim, got: draws.len() % dim });
        }
        let n = draws.len() / dim;
        let mut prior_overlap = Vec::with_capacity(n);
        let mut next_overlap = Vec::with_capacity(n);
        let (mut hits_prev, mut hits_next) = (0, 0);
        for x in draws.chunks_exact(dim) {
            if !cover.part_contains(part, x) {
                return Err(Error::InvalidParameter(alloc::format!("draw {x:?} lies outside part {part}")));
            }
            prior_overlap.push(cover.prior_overlap_contains(part, x));
            let next = cover.overlap_contains(part, x);
            next_overlap.push(next);
            hits_next += next as usize;
            hits_prev += (part > 0 && cover.overlap_contains(part - 1, x)) as usize;
        }
        Ok(Self { part, dim, draws, prior_overlap, next_overlap, hits_prev, hits_next, acceptance_rate, seed })
    }

    pub fn len(&self) -> usize {
        self.prior_overlap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prior_overlap.is_empty()
    }

    pub fn draw(&self, k: usize) -> &[f64] {
        &self.draws[k * self.dim..(k + 1) * self.dim]
    }

    pub fn rows(&self) -> core::slice::ChunksExact<'_, f64> {
        self.draws.chunks_exact(self.dim)
    }

    /// Draws outside `Δ_{1:j-1}`.
    pub fn eligible(&self) -> usize {
        self.prior_overlap.iter().filter(|&&p| !p).count()
    }

    /// Fraction of draws inside `Δ_{1:j-1}`.
    pub fn prior_fraction(&self) -> f64 {
        (self.len() - self.eligible()) as f64 / self.len() as f64
    }

    /// Recomputes `(hits_prev, hits_next)` from the draws.
    pub fn recount<C: Cover + ?Sized>(&self, cover: &C) -> (usize, usize) {
        let j = self.part;
        self.rows().fold((0, 0), |(p, n), x| {
            (p + (j > 0 && cover.overlap_contains(j - 1, x)) as usize, n + cover.overlap_contains(j, x) as usize)
        })
    }
}

fn snap(target: &dyn Target, x: &mut [f64]) {
    if target.is_lattice() {
        x.iter_mut().for_each(|v| *v = v.round());
    }
}

fn admissible<C: Cover + ?Sized>(target: &dyn Target, cover: &C, part: usize, x: &[f64]) -> bool {
    cover.part_contains(part, x) && target.ln_density(x) > f64::NEG_INFINITY
}

/// Anchor of the part, then a bounded random search over its bounding box.
fn initial_point<C: Cover + ?Sized, R: Rng + ?Sized>(
    target: &dyn Target,
    cover: &C,
    part: usize,
    scale: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let region = cover.part_box(part).intersection(&target.support());
    if region.is_empty() {
        return Err(Error::Initialization { part });
    }
    let mut x = region.anchor(scale);
    snap(target, &mut x);
    if admissible(target, cover, part, &x) {
        return Ok(x);
    }
    for _ in 0..INIT_ATTEMPTS {
        let mut y = region.probe(scale, rng);
        snap(target, &mut y);
        if admissible(target, cover, part, &y) {
            return Ok(y);
        }
    }
    Err(Error::Initialization { part })
}

/// One move of a Markov chain whose kernel is used as the proposal: the
/// proposed state is taken if it lies in `allowed`, otherwise the chain stays.
pub fn discrete_chain_step<R: Rng + ?Sized>(
    kernel: &TransitionKernel,
    state: usize,
    allowed: &[bool],
    rng: &mut R,
) -> Result<usize> {
    let n = kernel.states();
    if state >= n {
        return Err(Error::StateOutOfRange { state, states: n });
    }
    if allowed.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: allowed.len() });
    }
    let next = kernel.propose(state, rng);
    Ok(if allowed[next] { next } else { state })
}

/// Random-walk Metropolis-Hastings targeting `π(·|C_j)`.
pub fn subset_mh<C: Cover + ?Sized>(target: &dyn Target, cover: &C, config: &SubsetChainConfig) -> Result<SubsetSample> {
    config.validate()?;
    let part = config.part;
    if part >= cover.len() {
        return Err(Error::PartOutOfRange { index: part, parts: cover.len() });
    }
    let dim = target.dim();
    if cover.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: cover.dim() });
    }
    let mut rng = seeded(config.seed);
    let init_scale = match &config.proposal {
        Proposal::RandomWalk { scale } => {
            if scale.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: scale.len() });
            }
            scale.iter().map(|s| if *s > 0.0 { *s } else { 1.0 }).collect()
        }
        _ => vec![1.0; dim],
    };
    let mut x = match &config.start {
        Some(s) => {
            if s.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: s.len() });
            }
            if !admissible(target, cover, part, s) {
                return Err(Error::Initialization { part });
            }
            s.clone()
        }
        None => initial_point(target, cover, part, &init_scale, &mut rng)?,
    };
    let total = config.burn_in + config.length;
    let mut draws = Vec::with_capacity(config.length * dim);
    let mut accepted = 0usize;

    match &config.proposal {
        Proposal::Kernel(kernel) => {
            if dim != 1 {
                return Err(Error::DimensionMismatch { expected: 1, got: dim });
            }
            let allowed: Vec<bool> =
                (0..kernel.states()).map(|s| admissible(target, cover, part, &[s as f64])).collect();
            let mut state = x[0] as usize;
            for it in 0..total {
                let next = discrete_chain_step(kernel, state, &allowed, &mut rng)?;
                if it >= config.burn_in {
                    accepted += (next != state) as usize;
                    draws.push(next as f64);
                }
                state = next;
            }
        }
        proposal => {
            let mut y = vec![0.0; dim];
            let mut ln_x = target.ln_density(&x);
            for it in 0..total {
                y.copy_from_slice(&x);
                match proposal {
                    Proposal::RandomWalk { scale } => {
                        for (v, s) in y.iter_mut().zip(scale) {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            *v += s * z;
                        }
                        snap(target, &mut y);
                    }
                    Proposal::NearestNeighbor => {
                        let d = if dim == 1 { 0 } else { rng.random_range(0..dim) };
                        y[d] += if rng.random::<bool>() { 1.0 } else { -1.0 };
                    }
                    Proposal::Kernel(_) => unreachable!(),
                }
                let mut moved = false;
                if cover.part_contains(part, &y) {
                    let ln_y = target.ln_density(&y);
                    if ln_y > f64::NEG_INFINITY {
                        let ln_u = rng.random::<f64>().ln();
                        if ln_u < ln_y - ln_x {
                            core::mem::swap(&mut x, &mut y);
                            ln_x = ln_y;
                            moved = true;
                        }
                    }
                }
                if it >= config.burn_in {
                    accepted += moved as usize;
                    draws.extend_from_slice(&x);
                }
            }
        }
    }
    SubsetSample::from_draws(cover, part, draws, accepted as f64 / config.length as f64, config.seed)
}

/// Proposal law `q` together with a bound `ln(K q(x)) ≥ ln π(x)`.
pub trait Envelope: Sync {
    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64>;

    /// `ln(K q(x))`.
    fn ln_bound(&self, x: &[f64]) -> f64;
}

/// The target's own exact sampler; every draw is accepted and only the
/// restriction to the part rejects.
pub struct SelfEnvelope<'a>(pub &'a dyn Target);

impl Envelope for SelfEnvelope<'_> {
    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.0.sample_exact(rng).expect("self envelope needs an exact sampler")
    }

    fn ln_bound(&self, x: &[f64]) -> f64 {
        self.0.ln_density(x)
    }
}

/// Uniform proposal on a bounded box with a constant bound on `ln π`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformBox {
    pub region: Region,
    pub ln_max: f64,
}

impl Envelope for UniformBox {
    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.region.lo().iter().zip(self.region.hi()).map(|(l, h)| l + (h - l) * rng.random::<f64>()).collect()
    }

    fn ln_bound(&self, _x: &[f64]) -> f64 {
        self.ln_max
    }
}

/// Shifted exponential `lo + Exp(rate)` scaled by `exp(ln_scale)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialTail {
    pub lo: f64,
    pub rate: f64,
    pub ln_scale: f64,
}

impl Envelope for ExponentialTail {
    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let e: f64 = Exp1.sample(rng);
        vec![self.lo + e / self.rate]
    }

    fn ln_bound(&self, x: &[f64]) -> f64 {
        if x[0] < self.lo {
            return f64::NEG_INFINITY;
        }
        self.ln_scale + self.rate.ln() - self.rate * (x[0] - self.lo)
    }
}

/// A tight envelope for a gamma target restricted to an interval: uniform on
/// bounded intervals, exponential on `[lo, ∞)`.
pub fn gamma_envelope(gamma: &Gamma, region: &Region) -> Result<alloc::boxed::Box<dyn Envelope>> {
    let lo = region.lo()[0].max(0.0);
    let hi = region.hi()[0];
    if !(hi > lo) {
        return Err(Error::InvalidParameter("gamma envelope needs an interval of positive width".into()));
    }
    let (k, theta) = (gamma.shape(), gamma.scale());
    let ln_pdf = |x: f64| gamma.ln_density(&[x]);
    if hi.is_finite() {
        if k < 1.0 && lo == 0.0 {
            return Err(Error::InvalidParameter("gamma density is unbounded at zero".into()));
        }
        let mode = ((k - 1.0) * theta).max(0.0).clamp(lo, hi);
        let ln_max = ln_pdf(mode).max(ln_pdf(lo)).max(ln_pdf(hi));
        // Uniform density on [lo, hi] is 1/(hi-lo); the bound is K q = max π.
        return Ok(alloc::boxed::Box::new(UniformBox { region: Region::interval(lo, hi), ln_max }));
    }
    if lo == 0.0 && k < 1.0 {
        return Err(Error::InvalidParameter("gamma density is unbounded at zero".into()));
    }
    // For k > 1 the rate is lowered until π/q peaks at `lo`; for k ≤ 1 the
    // ratio already decreases from `lo`.
    let (rate, x_star) = if k <= 1.0 {
        (1.0 / theta, lo)
    } else {
        let rate = if lo > 0.0 { (1.0 / theta - (k - 1.0) / lo).max(0.5 / theta) } else { 0.5 / theta };
        (rate, ((k - 1.0) / (1.0 / theta - rate)).max(lo))
    };
    let ln_ratio_at = |x: f64| ln_pdf(x) - (rate.ln() - rate * (x - lo));
    let ln_scale = ln_ratio_at(x_star).max(ln_ratio_at(lo));
    Ok(alloc::boxed::Box::new(ExponentialTail { lo, rate, ln_scale }))
}

/// Default cap on envelope draws per accepted draw.
pub const REJECTION_ATTEMPTS_PER_DRAW: u64 = 10_000_000;

/// `m` i.i.d. draws from `π(·|C_j)` by rejection from `envelope`.
pub fn subset_rejection<C: Cover + ?Sized>(
    target: &dyn Target,
    envelope: &dyn Envelope,
    cover: &C,
    part: usize,
    m: usize,
    seed: u64,
) -> Result<SubsetSample> {
    if part >= cover.len() {
        return Err(Error::PartOutOfRange { index: part, parts: cover.len() });
    }
    if m == 0 {
        return Err(Error::InvalidParameter("sample size must be at least 1".into()));
    }
    let dim = target.dim();
    let mut rng = seeded(seed);
    let mut draws = Vec::with_capacity(m * dim);
    let mut attempts: u64 = 0;
    let cap = REJECTION_ATTEMPTS_PER_DRAW.saturating_mul(m as u64);
    let mut got = 0;
    while got < m {
        attempts += 1;
        if attempts > cap {
            return Err(Error::RejectionExhausted { part, attempts: cap });
        }
        let x = envelope.sample(&mut rng);
        if !cover.part_contains(part, &x) {
            continue;
        }
        let ln_p = target.ln_density(&x);
        if ln_p == f64::NEG_INFINITY {
            continue;
        }
        let log_ratio = ln_p - envelope.ln_bound(&x);
        if log_ratio > 1e-9 {
            return Err(Error::EnvelopeViolation { log_ratio });
        }
        if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
            draws.extend_from_slice(&x);
            got += 1;
        }
    }
    SubsetSample::from_draws(cover, part, draws, m as f64 / attempts as f64, seed)
}

/// Full-space random-walk pilot run: a warm-up of 10% of `size` with unit
/// steps, then `size` draws with steps equal to the warm-up standard deviation.
pub fn pilot_chain(target: &dyn Target, size: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if size == 0 {
        return Err(Error::InvalidParameter("pilot size must be at least 1".into()));
    }
    let dim = target.dim();
    let cover = crate::cover::LinkedCover::single(target.support());
    let warm = (size / 10).max(10);
    let warm_cfg =
        SubsetChainConfig::new(0, Proposal::RandomWalk { scale: vec![1.0; dim] }, warm, stream_rng(seed, stream::PILOT).random());
    let warm_run = subset_mh(target, &cover, &warm_cfg)?;
    let n = warm_run.len() as f64;
    let scale: Vec<f64> = (0..dim)
        .map(|d| {
            let mean = warm_run.rows().map(|x| x[d]).sum::<f64>() / n;
            let var = warm_run.rows().map(|x| (x[d] - mean).powi(2)).sum::<f64>() / n;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let last = warm_run.draw(warm_run.len() - 1).to_vec();
    let cfg = SubsetChainConfig::new(0, Proposal::RandomWalk { scale }, size, seed).with_start(last);
    let run = subset_mh(target, &cover, &cfg)?;
    Ok(run.rows().map(|r| r.to_vec()).collect())
}
