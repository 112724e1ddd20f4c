//! One worker per cover part, timed separately.
//!
//! Workers run on the rayon pool. Each owns a generator seeded from the
//! master seed and its part index, so results do not depend on scheduling or
//! on the number of threads. On a single core the per-worker wall times are
//! the emulated-parallel timings.

use std::time::Instant;

use dcs_core::cover::{Cover, LinkedCover};
use dcs_core::rng::derive_seed;
use dcs_core::samplers::{subset_mh, Proposal, SubsetChainConfig, SubsetSample};
use dcs_core::target::Target;
use rayon::prelude::*;

use crate::error::Result;

/// Outputs of independent workers, in part order.
#[derive(Debug, Clone, PartialEq)]
pub struct Timed<T> {
    pub outputs: Vec<T>,
    /// Wall time of each worker in seconds.
    pub seconds: Vec<f64>,
}

impl<T> Timed<T> {
    /// Runtime of the emulated-parallel run.
    pub fn max_seconds(&self) -> f64 {
        self.seconds.iter().cloned().fold(0.0, f64::max)
    }

    pub fn total_seconds(&self) -> f64 {
        self.seconds.iter().sum()
    }
}

/// Times a closure.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

/// Runs `work(0..n)` in parallel. The first error in part order wins.
pub fn run_workers<T, F>(n: usize, work: F) -> Result<Timed<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let results: Vec<(Result<T>, f64)> = (0..n).into_par_iter().map(|j| timed(|| work(j))).collect();
    let mut outputs = Vec::with_capacity(n);
    let mut seconds = Vec::with_capacity(n);
    for (r, s) in results {
        outputs.push(r?);
        seconds.push(s);
    }
    Ok(Timed { outputs, seconds })
}

/// Seed of worker `part`.
pub fn part_seed(master: u64, part: usize) -> u64 {
    derive_seed(master, part as u64 + 1)
}

/// One restricted chain per part.
pub fn sample_parts<C: Cover + ?Sized>(
    target: &dyn Target,
    cover: &C,
    configs: &[SubsetChainConfig],
) -> Result<Timed<SubsetSample>> {
    run_workers(configs.len(), |j| Ok(subset_mh(target, cover, &configs[j])?))
}

/// Parallel full-space chains, one started in each part, each run for
/// `length` iterations of which the first `burn_in` are dropped; the
/// retained draws are concatenated in part order.
pub fn rosenthal(
    target: &dyn Target,
    proposal: &Proposal,
    starts: &[Vec<f64>],
    length: usize,
    burn_in: usize,
    seed: u64,
) -> Result<Timed<SubsetSample>> {
    let full = LinkedCover::single(target.support());
    let kept = length.saturating_sub(burn_in).max(1);
    run_workers(starts.len(), |j| {
        let config = SubsetChainConfig::new(0, proposal.clone(), kept, part_seed(seed, j))
            .with_burn_in(length - kept)
            .with_start(starts[j].clone());
        Ok(subset_mh(target, &full, &config)?)
    })
}
