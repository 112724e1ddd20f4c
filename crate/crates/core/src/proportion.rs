//! Relative part masses from overlap hit counts.
//!
//! Two adjacent chains see the same overlap `Δ_{j-1}`, so the ratio of their
//! hit frequencies estimates `π(C_j) / π(C_{j-1})`. Chaining the ratios gives
//! every part mass up to a constant, fixed by requiring the exclusive pieces
//! `C_j \ Δ_{1:j-1}` to partition the space.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::cover::{Cover, DiscreteCover, LinkedCover, Region};
use crate::error::{Error, Result};
use crate::samplers::SubsetSample;
use crate::target::Target;

#[derive(Debug, Clone, PartialEq)]
pub struct ProportionEstimate {
    /// Normalized `π^M(C_j)`.
    pub pi: Vec<f64>,
    /// `π^M(C_j \ Δ_{1:j-1})`, summing to one.
    pub exclusive: Vec<f64>,
    /// Per adjacent overlap `Δ_j`: hits of chain `j` and of chain `j+1`.
    pub hits: Vec<[usize; 2]>,
    /// Draws per chain.
    pub lengths: Vec<usize>,
    /// Fraction of each chain inside its prior overlap.
    pub prior_fraction: Vec<f64>,
}

impl ProportionEstimate {
    pub fn parts(&self) -> usize {
        self.pi.len()
    }

    /// `Σ_j π^M(C_j) (1 - prior fraction of j)`, equal to one up to rounding.
    pub fn normalization_identity(&self) -> f64 {
        self.pi.iter().zip(&self.prior_fraction).map(|(p, f)| p * (1.0 - f)).sum()
    }
}

fn check_inputs<C: Cover + ?Sized>(samples: &[SubsetSample], cover: &C) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Empty("subset samples"));
    }
    if samples.len() != cover.len() {
        return Err(Error::InvalidParameter(alloc::format!(
            "{} samples for a cover with {} parts",
            samples.len(),
            cover.len()
        )));
    }
    for (j, s) in samples.iter().enumerate() {
        if s.part != j {
            return Err(Error::InvalidParameter(alloc::format!("sample {j} belongs to part {}", s.part)));
        }
        if s.is_empty() {
            return Err(Error::LengthMismatch { part: j, expected: 1, got: 0 });
        }
    }
    Ok(())
}

fn first_failure(samples: &[SubsetSample]) -> Option<Error> {
    (1..samples.len()).find_map(|j| {
        if samples[j - 1].hits_next == 0 {
            Some(Error::Failure { overlap: j - 1, part: j - 1 })
        } else if samples[j].hits_prev == 0 {
            Some(Error::Failure { overlap: j - 1, part: j })
        } else {
            None
        }
    })
}

fn finish(samples: &[SubsetSample], raw: Vec<f64>) -> ProportionEstimate {
    let prior_fraction: Vec<f64> = samples.iter().map(|s| s.prior_fraction()).collect();
    let z: f64 = raw.iter().zip(&prior_fraction).map(|(p, f)| p * (1.0 - f)).sum();
    let pi: Vec<f64> = raw.iter().map(|p| p / z).collect();
    let mut exclusive: Vec<f64> = pi.iter().zip(&prior_fraction).map(|(p, f)| p * (1.0 - f)).collect();
    let total: f64 = exclusive.iter().sum();
    exclusive.iter_mut().for_each(|e| *e /= total);
    let hits = (1..samples.len()).map(|j| [samples[j - 1].hits_next, samples[j].hits_prev]).collect();
    ProportionEstimate { pi, exclusive, hits, lengths: samples.iter().map(|s| s.len()).collect(), prior_fraction }
}

/// Estimates part masses from chains of equal length.
pub fn estimate_proportions<C: Cover + ?Sized>(samples: &[SubsetSample], cover: &C) -> Result<ProportionEstimate> {
    check_inputs(samples, cover)?;
    let m = samples[0].len();
    if let Some(s) = samples.iter().find(|s| s.len() != m) {
        return Err(Error::LengthMismatch { part: s.part, expected: m, got: s.len() });
    }
    if let Some(e) = first_failure(samples) {
        return Err(e);
    }
    let mut raw = Vec::with_capacity(samples.len());
    raw.push(1.0);
    for j in 1..samples.len() {
        let ratio = samples[j - 1].hits_next as f64 / samples[j].hits_prev as f64;
        raw.push(raw[j - 1] * ratio);
    }
    Ok(finish(samples, raw))
}

/// Estimates part masses from chains of different lengths; each hit ratio
/// is corrected by the ratio of chain lengths. With equal lengths the result
/// is identical to [`estimate_proportions`].
pub fn estimate_proportions_unequal<C: Cover + ?Sized>(
    samples: &[SubsetSample],
    cover: &C,
) -> Result<ProportionEstimate> {
    check_inputs(samples, cover)?;
    if let Some(e) = first_failure(samples) {
        return Err(e);
    }
    let mut raw = Vec::with_capacity(samples.len());
    raw.push(1.0);
    for j in 1..samples.len() {
        // Exact integer products, so equal lengths give the same rational.
        let num = samples[j].len() as u128 * samples[j - 1].hits_next as u128;
        let den = samples[j - 1].len() as u128 * samples[j].hits_prev as u128;
        raw.push(raw[j - 1] * (num as f64 / den as f64));
    }
    Ok(finish(samples, raw))
}

/// Probability that at least one of the `2(W-1)` chain/overlap pairs gets no
/// hit in `m` draws, when no pair misses with probability above `p_worst`.
pub fn failure_bound(p_worst: f64, m: usize, parts: usize) -> f64 {
    if parts <= 1 || p_worst <= 0.0 {
        return 0.0;
    }
    if p_worst >= 1.0 {
        return 1.0;
    }
    let miss = (m as f64 * p_worst.ln()).exp();
    let pairs = 2.0 * (parts - 1) as f64;
    -(pairs * (-miss).ln_1p()).exp_m1()
}

/// Exact masses of a cover under a target with known region masses.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueProportions {
    /// `π(C_j)`.
    pub pi: Vec<f64>,
    /// `π(Δ_j)` for adjacent overlaps.
    pub overlap: Vec<f64>,
    /// `π(C_j \ Δ_{1:j-1})`, summing to one when the cover covers the support.
    pub exclusive: Vec<f64>,
}

impl TrueProportions {
    /// Largest probability that one draw of chain `j` or `j+1` misses `Δ_j`.
    pub fn p_worst(&self) -> f64 {
        (0..self.overlap.len())
            .flat_map(|j| [1.0 - self.overlap[j] / self.pi[j], 1.0 - self.overlap[j] / self.pi[j + 1]])
            .fold(0.0, f64::max)
    }
}

/// Mass of a union of boxes by inclusion-exclusion.
fn union_mass(target: &dyn Target, boxes: &[Region]) -> Result<f64> {
    fn walk(target: &dyn Target, boxes: &[Region], start: usize, acc: &Region, depth: usize, sum: &mut f64) -> Result<()> {
        for i in start..boxes.len() {
            let next = acc.intersection(&boxes[i]);
            if next.is_empty() {
                continue;
            }
            let m = target.region_mass(&next).ok_or(Error::MissingOracle("region mass"))?;
            *sum += if depth % 2 == 0 { m } else { -m };
            walk(target, boxes, i + 1, &next, depth + 1, sum)?;
        }
        Ok(())
    }
    let mut sum = 0.0;
    if let Some(first) = boxes.first() {
        walk(target, boxes, 0, &Region::unbounded(first.dim()), 0, &mut sum)?;
    }
    Ok(sum)
}

/// Exact part, overlap and exclusive masses.
pub fn true_proportions(target: &dyn Target, cover: &LinkedCover) -> Result<TrueProportions> {
    let mass = |r: &Region| target.region_mass(r).ok_or(Error::MissingOracle("region mass"));
    let pi = cover.parts().iter().map(mass).collect::<Result<Vec<_>>>()?;
    let overlap = (0..cover.len().saturating_sub(1))
        .map(|j| mass(&cover.adjacent_overlap(j)))
        .collect::<Result<Vec<_>>>()?;
    let mut exclusive = Vec::with_capacity(cover.len());
    for j in 0..cover.len() {
        let prior: Vec<Region> = (0..j)
            .map(|k| cover.overlap(k, j))
            .filter(|r| !r.is_empty())
            .collect();
        exclusive.push(pi[j] - union_mass(target, &prior)?);
    }
    Ok(TrueProportions { pi, overlap, exclusive })
}

/// Exact masses of a discrete cover under a probability vector.
pub fn true_proportions_discrete(probabilities: &[f64], cover: &DiscreteCover) -> Result<TrueProportions> {
    if probabilities.len() != cover.states() {
        return Err(Error::DimensionMismatch { expected: cover.states(), got: probabilities.len() });
    }
    let w = cover.len();
    let sum_where = |f: &dyn Fn(usize) -> bool| -> f64 { (0..cover.states()).filter(|&s| f(s)).map(|s| probabilities[s]).sum() };
    let pi = (0..w).map(|j| sum_where(&|s| cover.mask(j)[s])).collect();
    let overlap = (0..w.saturating_sub(1)).map(|j| sum_where(&|s| cover.mask(j)[s] && cover.mask(j + 1)[s])).collect();
    let exclusive =
        (0..w).map(|j| sum_where(&|s| cover.mask(j)[s] && !(0..j).any(|k| cover.mask(k)[s]))).collect();
    Ok(TrueProportions { pi, overlap, exclusive })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::target::{Gamma, Uniform};
    use alloc::vec;

    fn two_part() -> LinkedCover {
        LinkedCover::linked(
            Region::interval(0.0, 1.0),
            vec![Region::interval(0.0, 0.55), Region::interval(0.45, 1.0)],
        )
        .unwrap()
    }

    /// Synthetic chains: `hits` draws inside the overlap, the rest outside.
    fn synthetic(cover: &LinkedCover, part: usize, m: usize, hits: usize) -> SubsetSample {
        let inside = 0.5;
        let outside = if part == 0 { 0.2 } else { 0.8 };
        let draws = (0..m).map(|k| if k < hits { inside } else { outside }).collect();
        SubsetSample::from_draws(cover, part, draws, 1.0, 0).unwrap()
    }

    #[test]
    fn hand_evaluated_two_part_example() {
        let cover = two_part();
        let s = vec![synthetic(&cover, 0, 100, 10), synthetic(&cover, 1, 100, 20)];
        let est = estimate_proportions(&s, &cover).unwrap();
        assert!((est.pi[0] - 1.0 / 1.4).abs() < 1e-15);
        assert!((est.pi[1] - 0.5 / 1.4).abs() < 1e-15);
        assert!((est.normalization_identity() - 1.0).abs() < 1e-12);
        assert!((est.exclusive.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(est.hits, vec![[10, 20]]);
    }

    #[test]
    fn single_part_is_one() {
        let cover = LinkedCover::single(Region::interval(0.0, 1.0));
        let s = SubsetSample::from_draws(&cover, 0, vec![0.3, 0.6], 1.0, 0).unwrap();
        let est = estimate_proportions(&[s], &cover).unwrap();
        assert_eq!(est.pi, vec![1.0]);
        assert_eq!(est.exclusive, vec![1.0]);
    }

    #[test]
    fn zero_hits_fail() {
        let cover = two_part();
        let s = vec![synthetic(&cover, 0, 100, 10), synthetic(&cover, 1, 100, 0)];
        assert_eq!(estimate_proportions(&s, &cover), Err(Error::Failure { overlap: 0, part: 1 }));
        assert_eq!(estimate_proportions_unequal(&s, &cover), Err(Error::Failure { overlap: 0, part: 1 }));
    }

    #[test]
    fn unequal_lengths() {
        let cover = two_part();
        let s = vec![synthetic(&cover, 0, 200, 20), synthetic(&cover, 1, 100, 20)];
        assert!(matches!(estimate_proportions(&s, &cover), Err(Error::LengthMismatch { .. })));
        let est = estimate_proportions_unequal(&s, &cover).unwrap();
        assert!((est.pi[1] / est.pi[0] - 0.5).abs() < 1e-15);
        let eq = vec![synthetic(&cover, 0, 100, 7), synthetic(&cover, 1, 100, 3)];
        assert_eq!(estimate_proportions(&eq, &cover), estimate_proportions_unequal(&eq, &cover));
    }

    #[test]
    fn failure_bound_values() {
        assert_eq!(failure_bound(0.0, 5, 3), 0.0);
        assert_eq!(failure_bound(1.0, 5, 2), 1.0);
        assert!((failure_bound(0.5, 2, 2) - 0.4375).abs() < 1e-15);
        assert_eq!(failure_bound(0.9, 5, 1), 0.0);
    }

    #[test]
    fn uniform_truth() {
        let u = Uniform::new(Region::interval(0.0, 1.0)).unwrap();
        let t = true_proportions(&u, &two_part()).unwrap();
        assert!((t.pi[0] - 0.55).abs() < 1e-15 && (t.pi[1] - 0.55).abs() < 1e-15);
        assert!((t.exclusive[0] - 0.55).abs() < 1e-15 && (t.exclusive[1] - 0.45).abs() < 1e-12);
        let single = true_proportions(&u, &LinkedCover::single(Region::interval(0.0, 1.0))).unwrap();
        assert_eq!(single.pi, vec![1.0]);
    }

    #[test]
    fn gamma_truth_sums() {
        let g = Gamma::new(4.0, 1.0).unwrap();
        let cover = LinkedCover::linked(
            Region::interval(0.0, f64::INFINITY),
            vec![Region::interval(0.0, 3.55), Region::interval(3.45, 7.55), Region::interval(7.45, f64::INFINITY)],
        )
        .unwrap();
        let t = true_proportions(&g, &cover).unwrap();
        let total: f64 = t.pi.iter().sum();
        assert!((total - (1.0 + t.overlap[0] + t.overlap[1])).abs() < 1e-12);
        assert!((t.exclusive.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(t.p_worst() > 0.9 && t.p_worst() < 1.0);
    }
}
