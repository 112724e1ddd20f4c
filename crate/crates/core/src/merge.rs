//! Merging per-part samples into one sample of the full target.

use alloc::vec;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::cover::Cover;
use crate::error::{Error, Result};
use crate::proportion::ProportionEstimate;
use crate::rng::{stream, stream_rng};
use crate::samplers::SubsetSample;

#[derive(Debug, Clone, PartialEq)]
pub struct MergedSample {
    pub dim: usize,
    /// Row-major draws.
    pub draws: Vec<f64>,
    /// Part each draw came from.
    pub source: Vec<usize>,
    /// Draws taken from each part.
    pub kept: Vec<usize>,
    pub seed: u64,
}

impl MergedSample {
    fn with_capacity(dim: usize, parts: usize, n: usize, seed: u64) -> Self {
        Self { dim, draws: Vec::with_capacity(n * dim), source: Vec::with_capacity(n), kept: vec![0; parts], seed }
    }

    fn push(&mut self, part: usize, x: &[f64]) {
        self.draws.extend_from_slice(x);
        self.source.push(part);
        self.kept[part] += 1;
    }

    /// Number of merged draws `N`.
    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn draw(&self, k: usize) -> &[f64] {
        &self.draws[k * self.dim..(k + 1) * self.dim]
    }

    pub fn rows(&self) -> core::slice::ChunksExact<'_, f64> {
        self.draws.chunks_exact(self.dim)
    }

    /// First coordinate of every draw.
    pub fn first_coordinate(&self) -> Vec<f64> {
        self.rows().map(|x| x[0]).collect()
    }
}

fn check(samples: &[SubsetSample], props: &ProportionEstimate) -> Result<usize> {
    if samples.is_empty() {
        return Err(Error::Empty("subset samples"));
    }
    if samples.len() != props.parts() {
        return Err(Error::InvalidParameter(alloc::format!(
            "{} samples but {} estimated proportions",
            samples.len(),
            props.parts()
        )));
    }
    let dim = samples[0].dim;
    if let Some(s) = samples.iter().find(|s| s.dim != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: s.dim });
    }
    Ok(dim)
}

/// Downsampling merge: draw `k` of chain `j` is kept with probability
/// `π(C_j)/max_r π(C_r)` unless it lies in `Δ_{1:j-1}`; draws kept at the
/// same iteration are shuffled before being appended.
pub fn merge(samples: &[SubsetSample], props: &ProportionEstimate, seed: u64) -> Result<MergedSample> {
    let dim = check(samples, props)?;
    let m = samples[0].len();
    if let Some(s) = samples.iter().find(|s| s.len() != m) {
        return Err(Error::LengthMismatch { part: s.part, expected: m, got: s.len() });
    }
    let max = props.pi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let keep: Vec<f64> = props.pi.iter().map(|p| p / max).collect();
    let mut keep_rng = stream_rng(seed, stream::MERGE_KEEP);
    let mut shuffle_rng = stream_rng(seed, stream::MERGE_SHUFFLE);
    let mut out = MergedSample::with_capacity(dim, samples.len(), m, seed);
    let mut batch: Vec<usize> = Vec::with_capacity(samples.len());
    for k in 0..m {
        batch.clear();
        for (j, s) in samples.iter().enumerate() {
            let u: f64 = keep_rng.random();
            if !s.prior_overlap[k] && u < keep[j] {
                batch.push(j);
            }
        }
        batch.shuffle(&mut shuffle_rng);
        for &j in &batch {
            out.push(j, samples[j].draw(k));
        }
    }
    Ok(out)
}

fn eligible_indices(s: &SubsetSample) -> Vec<usize> {
    (0..s.len()).filter(|&k| !s.prior_overlap[k]).collect()
}

fn categorical(weights: &[f64]) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(weights).map_err(|_| Error::InvalidParameter("exclusive weights are not a probability vector".into()))
}

/// Weighted merge: pick part `J` with probability equal to its exclusive
/// weight, then a uniform draw of chain `J` outside `Δ_{1:J-1}`.
pub fn merge_weighted(
    samples: &[SubsetSample],
    props: &ProportionEstimate,
    n_out: usize,
    seed: u64,
) -> Result<MergedSample> {
    let dim = check(samples, props)?;
    let pools: Vec<Vec<usize>> = samples.iter().map(eligible_indices).collect();
    if let Some(j) = (0..samples.len()).find(|&j| props.exclusive[j] > 0.0 && pools[j].is_empty()) {
        return Err(Error::NoEligibleDraws { part: j });
    }
    let index = categorical(&props.exclusive)?;
    let mut rng = stream_rng(seed, stream::MERGE_WEIGHTED);
    let mut out = MergedSample::with_capacity(dim, samples.len(), n_out, seed);
    for _ in 0..n_out {
        let j = index.sample(&mut rng);
        let k = pools[j][rng.random_range(0..pools[j].len())];
        out.push(j, samples[j].draw(k));
    }
    Ok(out)
}

/// Merge that also reuses the draws of chain `s+1` falling in `Δ_s`.
///
/// Part `s` is chosen by its exclusive weight. Its eligible region
/// `E_s = C_s \ Δ_{1:s-1}` splits into `E_s ∩ C_{s+1}` and `E_s \ C_{s+1}`;
/// the first piece is picked with the empirical probability of chain `s`
/// landing there, and is then served from the pooled draws of chains `s` and
/// `s+1` inside it.
pub fn merge_with_reuse<C: Cover + ?Sized>(
    samples: &[SubsetSample],
    props: &ProportionEstimate,
    cover: &C,
    n_out: usize,
    seed: u64,
) -> Result<MergedSample> {
    let dim = check(samples, props)?;
    let w = samples.len();
    if cover.len() != w {
        return Err(Error::InvalidParameter("cover and samples disagree on the number of parts".into()));
    }
    let mut overlap_pool: Vec<Vec<(usize, usize)>> = Vec::with_capacity(w);
    let mut exclusive_pool: Vec<Vec<(usize, usize)>> = Vec::with_capacity(w);
    let mut q = Vec::with_capacity(w);
    for s in 0..w {
        let own = &samples[s];
        let mut shared = Vec::new();
        let mut alone = Vec::new();
        for k in 0..own.len() {
            if own.prior_overlap[k] {
                continue;
            }
            if own.next_overlap[k] {
                shared.push((s, k));
            } else {
                alone.push((s, k));
            }
        }
        let eligible = shared.len() + alone.len();
        if eligible == 0 {
            if props.exclusive[s] > 0.0 {
                return Err(Error::NoEligibleDraws { part: s });
            }
            q.push(0.0);
        } else {
            q.push(shared.len() as f64 / eligible as f64);
        }
        if s + 1 < w {
            let next = &samples[s + 1];
            for k in 0..next.len() {
                let x = next.draw(k);
                if cover.part_contains(s, x) && !cover.prior_overlap_contains(s, x) {
                    shared.push((s + 1, k));
                }
            }
        }
        overlap_pool.push(shared);
        exclusive_pool.push(alone);
    }
    let index = categorical(&props.exclusive)?;
    let mut rng = stream_rng(seed, stream::MERGE_REUSE);
    let mut out = MergedSample::with_capacity(dim, w, n_out, seed);
    for _ in 0..n_out {
        let s = index.sample(&mut rng);
        let pool = if rng.random::<f64>() < q[s] { &overlap_pool[s] } else { &exclusive_pool[s] };
        if pool.is_empty() {
            return Err(Error::EmptyPool { part: s });
        }
        let (chain, k) = pool[rng.random_range(0..pool.len())];
        out.push(s, samples[chain].draw(k));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::{LinkedCover, Region};
    use crate::proportion::estimate_proportions;

    fn two_part() -> LinkedCover {
        LinkedCover::linked(
            Region::interval(0.0, 1.0),
            vec![Region::interval(0.0, 0.55), Region::interval(0.45, 1.0)],
        )
        .unwrap()
    }

    fn sample(cover: &LinkedCover, part: usize, draws: Vec<f64>) -> SubsetSample {
        SubsetSample::from_draws(cover, part, draws, 1.0, 0).unwrap()
    }

    #[test]
    fn single_part_is_identity() {
        let cover = LinkedCover::single(Region::interval(0.0, 1.0));
        let s = vec![sample(&cover, 0, vec![0.1, 0.2, 0.3])];
        let props = estimate_proportions(&s, &cover).unwrap();
        let m = merge(&s, &props, 1).unwrap();
        assert_eq!(m.draws, vec![0.1, 0.2, 0.3]);
        assert_eq!(m.kept, vec![3]);
    }

    #[test]
    fn equal_masses_keep_everything_outside_prior_overlap() {
        let cover = two_part();
        let s = vec![sample(&cover, 0, vec![0.1, 0.5, 0.2, 0.3]), sample(&cover, 1, vec![0.9, 0.5, 0.7, 0.6])];
        let props = estimate_proportions(&s, &cover).unwrap();
        assert!((props.pi[0] - props.pi[1]).abs() < 1e-15);
        let m = merge(&s, &props, 3).unwrap();
        assert_eq!(m.kept, vec![4, 3]);
        assert!(m.rows().zip(&m.source).all(|(x, &j)| j == 0 || x[0] > 0.55));
    }

    #[test]
    fn shuffle_seed_only_changes_order() {
        let cover = two_part();
        let s = vec![sample(&cover, 0, vec![0.1, 0.5, 0.2, 0.3]), sample(&cover, 1, vec![0.9, 0.5, 0.7, 0.6])];
        let props = estimate_proportions(&s, &cover).unwrap();
        let mut a = merge(&s, &props, 1).unwrap().draws;
        let mut b = merge(&s, &props, 2).unwrap().draws;
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_weights_draw_from_first_part() {
        let cover = two_part();
        let s = vec![sample(&cover, 0, vec![0.1, 0.5]), sample(&cover, 1, vec![0.9, 0.5])];
        let mut props = estimate_proportions(&s, &cover).unwrap();
        props.exclusive = vec![1.0, 0.0];
        let m = merge_weighted(&s, &props, 50, 4).unwrap();
        assert!(m.source.iter().all(|&j| j == 0));
        let r = merge_with_reuse(&s, &props, &cover, 50, 4).unwrap();
        assert!(r.source.iter().all(|&j| j == 0));
    }

    #[test]
    fn reuse_without_overlap_hits_uses_exclusive_pool() {
        let cover = two_part();
        let s = vec![sample(&cover, 0, vec![0.1, 0.2]), sample(&cover, 1, vec![0.9, 0.5])];
        let props = ProportionEstimate {
            pi: vec![1.0, 0.0],
            exclusive: vec![1.0, 0.0],
            hits: vec![[0, 1]],
            lengths: vec![2, 2],
            prior_fraction: vec![0.0, 0.5],
        };
        let r = merge_with_reuse(&s, &props, &cover, 100, 9).unwrap();
        assert!(r.rows().all(|x| x[0] < 0.45));
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let cover = two_part();
        let s = vec![sample(&cover, 0, vec![0.1, 0.5]), sample(&cover, 1, vec![0.5])];
        let props = crate::proportion::estimate_proportions_unequal(&s, &cover).unwrap();
        assert!(matches!(merge(&s, &props, 0), Err(Error::LengthMismatch { .. })));
    }
}
