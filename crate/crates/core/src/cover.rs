//! Regions, linked covers and automatic cover construction from pilot draws.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{stream, stream_rng};
use crate::samplers;
use crate::target::Target;

/// A closed axis-aligned hyperrectangle with extended-real bounds.
///
/// Any dimension with `lo > hi` makes the region empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Region {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() {
            return Err(Error::InvalidParameter("region needs at least one dimension".into()));
        }
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch { expected: lo.len(), got: hi.len() });
        }
        if lo.iter().chain(&hi).any(|v| v.is_nan()) {
            return Err(Error::InvalidParameter("region bound is NaN".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        Self { lo: vec![lo], hi: vec![hi] }
    }

    pub fn unbounded(dim: usize) -> Self {
        Self { lo: vec![f64::NEG_INFINITY; dim], hi: vec![f64::INFINITY; dim] }
    }

    /// The canonical empty region.
    pub fn empty(dim: usize) -> Self {
        Self { lo: vec![f64::INFINITY; dim], hi: vec![f64::NEG_INFINITY; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| l > h)
    }

    pub fn contains(&self, point: &[f64]) -> Result<bool> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: point.len() });
        }
        Ok(self.covers(point))
    }

    /// Membership without the dimension check.
    #[inline]
    pub fn covers(&self, point: &[f64]) -> bool {
        debug_assert_eq!(point.len(), self.dim());
        point
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (l, h))| l <= x && x <= h)
    }

    pub fn intersection(&self, other: &Region) -> Region {
        let lo = self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect();
        let hi = self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect();
        Region { lo, hi }
    }

    /// `true` when every point of `self` lies in `other`.
    pub fn is_subset_of(&self, other: &Region) -> bool {
        self.is_empty()
            || self
                .lo
                .iter()
                .zip(&self.hi)
                .zip(other.lo.iter().zip(&other.hi))
                .all(|((l, h), (ol, oh))| ol <= l && h <= oh)
    }

    /// A deterministic interior point: midpoint of bounded sides, one `scale`
    /// unit inside a half-infinite side, zero for a fully unbounded side.
    pub fn anchor(&self, scale: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|d| {
                let (l, h, s) = (self.lo[d], self.hi[d], scale[d].abs());
                match (l.is_finite(), h.is_finite()) {
                    (true, true) => 0.5 * (l + h),
                    (true, false) => l + s,
                    (false, true) => h - s,
                    (false, false) => 0.0,
                }
            })
            .collect()
    }

    /// Draws a random probe point; unbounded sides are explored with
    /// exponential or normal tails of width `scale`.
    pub fn probe<R: Rng + ?Sized>(&self, scale: &[f64], rng: &mut R) -> Vec<f64> {
        (0..self.dim())
            .map(|d| {
                let (l, h, s) = (self.lo[d], self.hi[d], scale[d].abs().max(1e-12));
                match (l.is_finite(), h.is_finite()) {
                    (true, true) => l + (h - l) * rng.random::<f64>(),
                    (true, false) => l + s * <Exp1 as Distribution<f64>>::sample(&Exp1, rng),
                    (false, true) => h - s * <Exp1 as Distribution<f64>>::sample(&Exp1, rng),
                    (false, false) => s * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng),
                }
            })
            .collect()
    }
}

/// Common interface of continuous and discrete linked covers.
///
/// Points are coordinate slices; discrete states are encoded as a single
/// integer-valued coordinate.
pub trait Cover: Sync {
    fn dim(&self) -> usize;

    /// Number of parts `W`.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn part_contains(&self, part: usize, x: &[f64]) -> bool;

    /// Bounding box of a part.
    fn part_box(&self, part: usize) -> Region;

    /// Membership in the adjacent overlap `C_left ∩ C_{left+1}`.
    fn overlap_contains(&self, left: usize, x: &[f64]) -> bool {
        left + 1 < self.len() && self.part_contains(left, x) && self.part_contains(left + 1, x)
    }

    /// Membership in the union of the overlaps of `part` with all earlier parts.
    fn prior_overlap_contains(&self, part: usize, x: &[f64]) -> bool {
        self.part_contains(part, x) && (0..part).any(|k| self.part_contains(k, x))
    }
}

/// Checked form of [`Cover::prior_overlap_contains`].
pub fn in_prior_overlap<C: Cover + ?Sized>(cover: &C, part: usize, x: &[f64]) -> Result<bool> {
    if part >= cover.len() {
        return Err(Error::PartOutOfRange { index: part, parts: cover.len() });
    }
    if x.len() != cover.dim() {
        return Err(Error::DimensionMismatch { expected: cover.dim(), got: x.len() });
    }
    Ok(cover.prior_overlap_contains(part, x))
}

/// Grid layout of a cover built by [`merge_cover`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridLayout {
    pub part_counts: Vec<usize>,
    /// Grid coordinates of every part, in cover order.
    pub cells: Vec<Vec<usize>>,
}

/// Ordered overlapping hyperrectangles covering a support region.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkedCover {
    support: Region,
    parts: Vec<Region>,
    /// Nonempty pairwise overlaps `(j, k, C_j ∩ C_k)` with `j < k`.
    overlaps: Vec<(usize, usize, Region)>,
    grid: Option<GridLayout>,
}

impl LinkedCover {
    /// Builds a cover without asserting linkage; see [`LinkedCover::linked`].
    pub fn new(support: Region, parts: Vec<Region>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidCover("a cover needs at least one part".into()));
        }
        let dim = support.dim();
        if let Some(p) = parts.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: p.dim() });
        }
        let mut overlaps = Vec::new();
        for j in 0..parts.len() {
            for k in (j + 1)..parts.len() {
                let inter = parts[j].intersection(&parts[k]);
                if !inter.is_empty() {
                    overlaps.push((j, k, inter));
                }
            }
        }
        Ok(Self { support, parts, overlaps, grid: None })
    }

    /// Builds a cover and fails unless every adjacent overlap is nonempty.
    pub fn linked(support: Region, parts: Vec<Region>) -> Result<Self> {
        let cover = Self::new(support, parts)?;
        if let Some(j) = cover.first_empty_overlap() {
            return Err(Error::InvalidCover(format!("parts {j} and {} do not overlap", j + 1)));
        }
        Ok(cover)
    }

    /// The trivial cover `{S}`.
    pub fn single(support: Region) -> Self {
        Self { parts: vec![support.clone()], support, overlaps: Vec::new(), grid: None }
    }

    pub fn support(&self) -> &Region {
        &self.support
    }

    pub fn parts(&self) -> &[Region] {
        &self.parts
    }

    pub fn part(&self, j: usize) -> &Region {
        &self.parts[j]
    }

    pub fn grid(&self) -> Option<&GridLayout> {
        self.grid.as_ref()
    }

    /// `C_j ∩ C_k`, empty when the parts are disjoint.
    pub fn overlap(&self, j: usize, k: usize) -> Region {
        let (a, b) = if j < k { (j, k) } else { (k, j) };
        self.overlaps
            .iter()
            .find(|(x, y, _)| *x == a && *y == b)
            .map(|(_, _, r)| r.clone())
            .unwrap_or_else(|| Region::empty(self.support.dim()))
    }

    /// `Δ_j = C_j ∩ C_{j+1}`; empty for the last part.
    pub fn adjacent_overlap(&self, j: usize) -> Region {
        if j + 1 >= self.parts.len() {
            return Region::empty(self.support.dim());
        }
        self.overlap(j, j + 1)
    }

    pub fn first_empty_overlap(&self) -> Option<usize> {
        (0..self.parts.len().saturating_sub(1)).find(|&j| self.adjacent_overlap(j).is_empty())
    }

    /// Whether the union of the parts equals the support. Exact for grid
    /// covers; otherwise a Monte Carlo hit test with `probes` random points.
    pub fn covers_support(&self, probes: usize, seed: u64) -> bool {
        if let Some(grid) = &self.grid {
            return grid_covers(&self.support, &self.parts, grid);
        }
        let mut rng = stream_rng(seed, stream::PROBES);
        let scale = vec![1.0; self.support.dim()];
        (0..probes).all(|_| {
            let x = self.support.probe(&scale, &mut rng);
            self.parts.iter().any(|p| p.covers(&x))
        })
    }
}

fn grid_covers(support: &Region, parts: &[Region], grid: &GridLayout) -> bool {
    // Each dimension's slabs must start at the support's lower bound, end at
    // its upper bound and chain without gaps; every cell must be present.
    let total: usize = grid.part_counts.iter().product();
    if total != parts.len() {
        return false;
    }
    for (d, &count) in grid.part_counts.iter().enumerate() {
        let mut slabs: Vec<(f64, f64)> = (0..count)
            .map(|i| {
                let j = grid.cells.iter().position(|c| c[d] == i).unwrap_or(0);
                (parts[j].lo[d], parts[j].hi[d])
            })
            .collect();
        slabs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if slabs[0].0 > support.lo[d] || slabs[count - 1].1 < support.hi[d] {
            return false;
        }
        if slabs.windows(2).any(|w| w[0].1 < w[1].0) {
            return false;
        }
    }
    let mut seen = grid.cells.clone();
    seen.sort();
    seen.dedup();
    seen.len() == total
}

impl Cover for LinkedCover {
    fn dim(&self) -> usize {
        self.support.dim()
    }

    fn len(&self) -> usize {
        self.parts.len()
    }

    #[inline]
    fn part_contains(&self, part: usize, x: &[f64]) -> bool {
        self.parts[part].covers(x)
    }

    fn part_box(&self, part: usize) -> Region {
        self.parts[part].intersection(&self.support)
    }
}

/// A linked cover of the finite state space `{0, .., states-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCover {
    states: usize,
    parts: Vec<Vec<usize>>,
    masks: Vec<Vec<bool>>,
}

impl DiscreteCover {
    pub fn new(states: usize, parts: Vec<Vec<usize>>) -> Result<Self> {
        if states == 0 || parts.is_empty() {
            return Err(Error::InvalidCover("a discrete cover needs states and parts".into()));
        }
        let mut masks = Vec::with_capacity(parts.len());
        let mut sorted_parts = Vec::with_capacity(parts.len());
        for (j, mut p) in parts.into_iter().enumerate() {
            p.sort_unstable();
            p.dedup();
            if p.is_empty() {
                return Err(Error::InvalidCover(format!("part {j} is empty")));
            }
            if let Some(&s) = p.iter().find(|&&s| s >= states) {
                return Err(Error::StateOutOfRange { state: s, states });
            }
            let mut mask = vec![false; states];
            p.iter().for_each(|&s| mask[s] = true);
            masks.push(mask);
            sorted_parts.push(p);
        }
        Ok(Self { states, parts: sorted_parts, masks })
    }

    /// Like [`DiscreteCover::new`] but also asserts linkage and coverage.
    pub fn linked(states: usize, parts: Vec<Vec<usize>>) -> Result<Self> {
        let cover = Self::new(states, parts)?;
        for j in 0..cover.parts.len().saturating_sub(1) {
            if !(0..states).any(|s| cover.masks[j][s] && cover.masks[j + 1][s]) {
                return Err(Error::InvalidCover(format!("parts {j} and {} do not overlap", j + 1)));
            }
        }
        if let Some(s) = (0..states).find(|&s| !cover.masks.iter().any(|m| m[s])) {
            return Err(Error::InvalidCover(format!("state {s} is not covered")));
        }
        Ok(cover)
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn parts(&self) -> &[Vec<usize>] {
        &self.parts
    }

    pub fn mask(&self, part: usize) -> &[bool] {
        &self.masks[part]
    }

    #[inline]
    fn state_of(&self, x: &[f64]) -> Option<usize> {
        let v = x[0];
        if v >= 0.0 && v.fract() == 0.0 && (v as usize) < self.states {
            Some(v as usize)
        } else {
            None
        }
    }
}

impl Cover for DiscreteCover {
    fn dim(&self) -> usize {
        1
    }

    fn len(&self) -> usize {
        self.parts.len()
    }

    #[inline]
    fn part_contains(&self, part: usize, x: &[f64]) -> bool {
        self.state_of(x).is_some_and(|s| self.masks[part][s])
    }

    fn part_box(&self, part: usize) -> Region {
        let p = &self.parts[part];
        Region::interval(p[0] as f64, p[p.len() - 1] as f64)
    }
}

/// Per-part and per-overlap saturation findings.
#[derive(Debug, Clone, PartialEq)]
pub struct SaturationReport {
    /// Whether positive target density was detected in each part.
    pub parts: Vec<bool>,
    /// Whether each adjacent overlap `Δ_j` is nonempty.
    pub overlap_nonempty: Vec<bool>,
    /// Whether positive density was detected in each adjacent overlap.
    pub overlap_saturated: Vec<bool>,
}

impl SaturationReport {
    /// Empty adjacent overlaps break the linked-cover property outright.
    pub fn hard_failures(&self) -> Vec<usize> {
        self.overlap_nonempty
            .iter()
            .enumerate()
            .filter(|(_, ok)| !**ok)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn is_saturated(&self) -> bool {
        self.parts.iter().all(|&p| p) && self.overlap_saturated.iter().all(|&o| o)
    }
}

/// Probes every part and adjacent overlap for positive target density.
pub fn validate_saturated(
    cover: &LinkedCover,
    target: &dyn Target,
    probe_count: usize,
    seed: u64,
) -> Result<SaturationReport> {
    if probe_count == 0 {
        return Err(Error::InvalidParameter("probe_count must be at least 1".into()));
    }
    let mut rng = stream_rng(seed, stream::PROBES);
    let support = target.support();
    let dim = cover.dim();
    let scale = vec![1.0; dim];
    let mut detect = |region: &Region| -> bool {
        let region = region.intersection(&support);
        if region.is_empty() {
            return false;
        }
        let snap = |mut x: Vec<f64>| {
            if target.is_lattice() {
                x.iter_mut().for_each(|v| *v = v.round());
            }
            x
        };
        let anchor = snap(region.anchor(&scale));
        if region.covers(&anchor) && target.ln_density(&anchor) > f64::NEG_INFINITY {
            return true;
        }
        (0..probe_count).any(|_| {
            let x = snap(region.probe(&scale, &mut rng));
            region.covers(&x) && target.ln_density(&x) > f64::NEG_INFINITY
        })
    };
    let parts = cover.parts().iter().map(&mut detect).collect();
    let w = cover.len();
    let mut overlap_nonempty = Vec::with_capacity(w.saturating_sub(1));
    let mut overlap_saturated = Vec::with_capacity(w.saturating_sub(1));
    for j in 0..w.saturating_sub(1) {
        let delta = cover.adjacent_overlap(j);
        overlap_nonempty.push(!delta.is_empty());
        overlap_saturated.push(!delta.is_empty() && detect(&delta));
    }
    Ok(SaturationReport { parts, overlap_nonempty, overlap_saturated })
}

/// Splits `parts` cells over `n_dims` dimensions: the factorization with the
/// smallest max/min ratio, larger factors first.
pub fn disperse_cover(parts: usize, n_dims: usize) -> Vec<usize> {
    let parts = parts.max(1);
    let n_dims = n_dims.max(1);
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut current = Vec::with_capacity(n_dims);
    factorizations(parts, n_dims, parts, &mut current, &mut |f| {
        let max = *f.iter().max().unwrap_or(&1) as f64;
        let min = *f.iter().min().unwrap_or(&1) as f64;
        let ratio = max / min;
        let better = match &best {
            None => true,
            Some((r, b)) => ratio < *r || (ratio == *r && f > b.as_slice()),
        };
        if better {
            best = Some((ratio, f.to_vec()));
        }
    });
    best.map(|(_, f)| f).unwrap_or_else(|| vec![1; n_dims])
}

// Non-increasing factor sequences whose product is `remaining`.
fn factorizations(
    remaining: usize,
    slots: usize,
    max_factor: usize,
    current: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]),
) {
    if slots == 1 {
        if remaining <= max_factor {
            current.push(remaining);
            visit(current);
            current.pop();
        }
        return;
    }
    for f in (1..=remaining.min(max_factor)).rev() {
        if remaining % f == 0 {
            current.push(f);
            factorizations(remaining / f, slots - 1, f, current, visit);
            current.pop();
        }
    }
}

/// A quantile function `p ↦ x`.
pub trait Quantile {
    fn quantile(&self, p: f64) -> f64;
}

impl<F: Fn(f64) -> f64> Quantile for F {
    fn quantile(&self, p: f64) -> f64 {
        self(p)
    }
}

/// Empirical quantiles with mid-point interpolation: the `i`-th order
/// statistic (0-based) sits at probability `(i + 0.5) / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalQuantiles {
    sorted: Vec<f64>,
}

impl EmpiricalQuantiles {
    pub fn new(sample: &[f64]) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::Empty("pilot sample"));
        }
        if sample.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidParameter("pilot sample contains NaN".into()));
        }
        let mut sorted = sample.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Breakpoints at probabilities `i / parts`, `i = 1..parts`.
    pub fn breakpoints(&self, parts: usize) -> Vec<f64> {
        (1..parts).map(|i| self.quantile(i as f64 / parts as f64)).collect()
    }

    /// Empirical mass of the closed interval `[lo, hi]`.
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        let n = self.sorted.iter().filter(|&&x| lo <= x && x <= hi).count();
        n as f64 / self.sorted.len() as f64
    }
}

impl Quantile for EmpiricalQuantiles {
    fn quantile(&self, p: f64) -> f64 {
        let n = self.sorted.len();
        let pos = p * n as f64 - 0.5;
        if pos <= 0.0 {
            return self.sorted[0];
        }
        if pos >= (n - 1) as f64 {
            return self.sorted[n - 1];
        }
        let i = pos.floor() as usize;
        let t = pos - i as f64;
        self.sorted[i] + t * (self.sorted[i + 1] - self.sorted[i])
    }
}

/// Slab boundaries at empirical quantiles of a one-dimensional pilot.
pub fn quantile_breakpoints(pilot: &[f64], parts: usize) -> Result<Vec<f64>> {
    if parts == 0 {
        return Err(Error::InvalidParameter("parts must be at least 1".into()));
    }
    Ok(EmpiricalQuantiles::new(pilot)?.breakpoints(parts))
}

/// Builds a grid cover: dimension `d` is cut into `part_counts[d]` slabs
/// `{x : (i-1)/p - δ/2 ≤ F_d(x) ≤ i/p + δ/2}`, and the cells are ordered in
/// boustrophedon order so consecutive cells are grid neighbours.
pub fn merge_cover(
    quantiles: &[&dyn Quantile],
    part_counts: &[usize],
    delta: f64,
    support: &Region,
) -> Result<LinkedCover> {
    let dim = support.dim();
    if quantiles.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: quantiles.len() });
    }
    if part_counts.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: part_counts.len() });
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("overlap mass must be positive, got {delta}")));
    }
    if part_counts.contains(&0) {
        return Err(Error::InvalidParameter("part counts must be positive".into()));
    }

    let mut slabs: Vec<Vec<(f64, f64)>> = Vec::with_capacity(dim);
    for d in 0..dim {
        let p = part_counts[d];
        let (lo_s, hi_s) = (support.lo[d], support.hi[d]);
        if p == 1 {
            slabs.push(vec![(lo_s, hi_s)]);
            continue;
        }
        if delta >= 1.0 || (p >= 3 && delta >= 1.0 / p as f64) {
            return Err(Error::InvalidCover(format!(
                "overlap mass {delta} makes non-adjacent slabs meet in dimension {d}"
            )));
        }
        let q = quantiles[d];
        let pf = p as f64;
        let mut dim_slabs = Vec::with_capacity(p);
        for i in 0..p {
            let lo = if i == 0 { lo_s } else { q.quantile(i as f64 / pf - delta / 2.0).max(lo_s) };
            let hi = if i + 1 == p { hi_s } else { q.quantile((i + 1) as f64 / pf + delta / 2.0).min(hi_s) };
            if !(hi > lo) {
                return Err(Error::InvalidCover(format!("slab {i} in dimension {d} has zero width")));
            }
            dim_slabs.push((lo, hi));
        }
        for i in 0..p - 1 {
            if !(dim_slabs[i].1 > dim_slabs[i + 1].0) {
                return Err(Error::InvalidCover(format!(
                    "slabs {i} and {} in dimension {d} do not overlap",
                    i + 1
                )));
            }
        }
        slabs.push(dim_slabs);
    }

    let cells = snake_order(part_counts);
    let parts = cells
        .iter()
        .map(|cell| {
            let lo = (0..dim).map(|d| slabs[d][cell[d]].0).collect();
            let hi = (0..dim).map(|d| slabs[d][cell[d]].1).collect();
            Region { lo, hi }
        })
        .collect();
    let mut cover = LinkedCover::linked(support.clone(), parts)?;
    cover.grid = Some(GridLayout { part_counts: part_counts.to_vec(), cells });
    Ok(cover)
}

/// Reflected mixed-radix enumeration of a grid: consecutive cells differ by
/// one step in exactly one coordinate. The first dimension varies fastest.
pub fn snake_order(part_counts: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = part_counts.iter().product();
    let n = part_counts.len();
    let mut idx = vec![0usize; n];
    let mut dir = vec![1isize; n];
    let mut out = Vec::with_capacity(total);
    out.push(idx.clone());
    for _ in 1..total {
        let mut d = 0;
        while d < n {
            let next = idx[d] as isize + dir[d];
            if next >= 0 && (next as usize) < part_counts[d] {
                idx[d] = next as usize;
                break;
            }
            dir[d] = -dir[d];
            d += 1;
        }
        out.push(idx.clone());
    }
    out
}

/// Settings for [`estimate_cover`].
#[derive(Debug, Clone, PartialEq)]
pub struct CoverEstimation {
    pub pilot_size: usize,
    pub parts: usize,
    /// Overlap mass; defaults to `0.1 / parts`.
    pub delta: Option<f64>,
    /// Dimensions to split; defaults to all.
    pub split_dims: Option<Vec<usize>>,
}

impl CoverEstimation {
    pub fn new(pilot_size: usize, parts: usize) -> Self {
        Self { pilot_size, parts, delta: None, split_dims: None }
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(0.1 / self.parts.max(1) as f64)
    }
}

/// Runs a full-space pilot chain and builds a grid cover from its quantiles.
pub fn estimate_cover(target: &dyn Target, settings: &CoverEstimation, seed: u64) -> Result<LinkedCover> {
    if settings.pilot_size == 0 {
        return Err(Error::InvalidParameter("pilot_size must be at least 1".into()));
    }
    let support = target.support();
    if settings.parts <= 1 {
        return Ok(LinkedCover::single(support));
    }
    let pilot = samplers::pilot_chain(target, settings.pilot_size, seed)?;
    cover_from_pilot(&pilot, &support, settings)
}

/// Builds a cover from user-supplied pilot draws (one row per draw).
pub fn cover_from_pilot(pilot: &[Vec<f64>], support: &Region, settings: &CoverEstimation) -> Result<LinkedCover> {
    let dim = support.dim();
    if pilot.is_empty() {
        return Err(Error::Empty("pilot sample"));
    }
    if let Some(row) = pilot.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
    }
    if settings.parts <= 1 {
        return Ok(LinkedCover::single(support.clone()));
    }
    let split_dims: Vec<usize> = settings.split_dims.clone().unwrap_or_else(|| (0..dim).collect());
    if let Some(&d) = split_dims.iter().find(|&&d| d >= dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: d + 1 });
    }
    let factors = disperse_cover(settings.parts, split_dims.len());
    let mut part_counts = vec![1usize; dim];
    for (&d, &f) in split_dims.iter().zip(&factors) {
        part_counts[d] = f;
    }
    let quantiles: Vec<EmpiricalQuantiles> = (0..dim)
        .map(|d| EmpiricalQuantiles::new(&pilot.iter().map(|r| r[d]).collect::<Vec<_>>()))
        .collect::<Result<_>>()?;
    let refs: Vec<&dyn Quantile> = quantiles.iter().map(|q| q as &dyn Quantile).collect();
    merge_cover(&refs, &part_counts, settings.delta(), support)
}

/// Human-readable one-line summary, used by the CLI.
pub fn describe(cover: &LinkedCover) -> String {
    let mut s = format!("{} parts in {} dims", cover.len(), cover.dim());
    if let Some(g) = cover.grid() {
        s.push_str(&format!(", grid {:?}", g.part_counts));
    }
    s
}
