//! Distances to known distributions, autocorrelation and stationary laws.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg;
use crate::special;

/// Empirical total variation in max-deviation form.
#[derive(Debug, Clone, PartialEq)]
pub struct TvReport {
    pub tv: f64,
    pub n: usize,
    pub label: String,
}

/// Visit counts of `0..states`.
pub fn state_counts(chain: &[usize], states: usize) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; states];
    for &s in chain {
        *counts.get_mut(s).ok_or(Error::StateOutOfRange { state: s, states })? += 1;
    }
    Ok(counts)
}

/// `max_j |count_j / N - λ_j|`.
pub fn tv_from_counts(counts: &[u64], lambda: &[f64]) -> Result<f64> {
    if counts.len() != lambda.len() {
        return Err(Error::DimensionMismatch { expected: lambda.len(), got: counts.len() });
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(Error::Empty("chain"));
    }
    Ok(counts.iter().zip(lambda).map(|(&c, l)| (c as f64 / n as f64 - l).abs()).fold(0.0, f64::max))
}

pub fn tv_discrete(chain: &[usize], lambda: &[f64]) -> Result<TvReport> {
    let counts = state_counts(chain, lambda.len())?;
    Ok(TvReport { tv: tv_from_counts(&counts, lambda)?, n: chain.len(), label: String::new() })
}

/// Same statistic for states stored as `f64` coordinates.
pub fn tv_discrete_values(values: &[f64], lambda: &[f64]) -> Result<TvReport> {
    let states = lambda.len();
    let chain: Vec<usize> = values
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 && (v as usize) < states {
                Ok(v as usize)
            } else {
                Err(Error::StateOutOfRange { state: v.max(0.0) as usize, states })
            }
        })
        .collect::<Result<_>>()?;
    tv_discrete(&chain, lambda)
}

fn check_stochastic(p: &[Vec<f64>]) -> Result<usize> {
    let n = p.len();
    if n == 0 {
        return Err(Error::Empty("transition matrix"));
    }
    for (i, row) in p.iter().enumerate() {
        if row.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: row.len() });
        }
        let sum: f64 = row.iter().sum();
        if row.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::NotStochastic { row: i, sum });
        }
    }
    Ok(n)
}

fn reaches_all(n: usize, edge: impl Fn(usize, usize) -> bool) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !seen[j] && edge(i, j) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.iter().all(|&s| s)
}

fn stationary_residual(p: &[Vec<f64>], lambda: &[f64]) -> Vec<f64> {
    let n = p.len();
    (0..n).map(|j| (0..n).map(|i| lambda[i] * p[i][j]).sum::<f64>() - lambda[j]).collect()
}

/// Solves `λP = λ`, `Σλ = 1` for an irreducible stochastic matrix.
pub fn stationary_distribution(p: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = check_stochastic(p)?;
    if !reaches_all(n, |i, j| p[i][j] > 0.0) || !reaches_all(n, |i, j| p[j][i] > 0.0) {
        return Err(Error::Reducible);
    }
    // Rows 0..n-1 of (P^T - I), last row replaced by the normalization.
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| p[i][j] - if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    a[n - 1] = vec![1.0; n];
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    let mut lambda = linalg::solve(&a, &b)?;
    // Two rounds of iterative refinement.
    for _ in 0..2 {
        let r: Vec<f64> =
            (0..n).map(|i| b[i] - a[i].iter().zip(&lambda).map(|(x, y)| x * y).sum::<f64>()).collect();
        let d = linalg::solve(&a, &r)?;
        lambda.iter_mut().zip(&d).for_each(|(l, d)| *l += d);
    }
    lambda.iter_mut().for_each(|l| *l = l.max(0.0));
    let s: f64 = lambda.iter().sum();
    lambda.iter_mut().for_each(|l| *l /= s);
    Ok(lambda)
}

/// `‖λP - λ‖_∞`.
pub fn stationary_error(p: &[Vec<f64>], lambda: &[f64]) -> f64 {
    stationary_residual(p, lambda).iter().fold(0.0, |m, r| m.max(r.abs()))
}

/// Autocorrelations at lags `0..=max_lag` from the biased autocovariance.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if n <= max_lag {
        return Err(Error::InvalidParameter(alloc::format!("series of length {n} is too short for lag {max_lag}")));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let c0 = centered.iter().map(|x| x * x).sum::<f64>();
    if !(c0 > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok((0..=max_lag)
        .map(|k| if k == 0 { 1.0 } else { centered[..n - k].iter().zip(&centered[k..]).map(|(a, b)| a * b).sum::<f64>() / c0 })
        .collect())
}

fn sorted(sample: &[f64]) -> Vec<f64> {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Kolmogorov distance between the empirical CDF of `sample` and `cdf`.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::Empty("sample"));
    }
    let x = sorted(sample);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < x.len() {
        // Handle ties: the empirical CDF jumps once per distinct value.
        let mut j = i;
        while j + 1 < x.len() && x[j + 1] == x[i] {
            j += 1;
        }
        let f = cdf(x[i]);
        d = d.max((f - i as f64 / n).abs()).max(((j + 1) as f64 / n - f).abs());
        i = j + 1;
    }
    Ok(d)
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("sample"));
    }
    let (x, y) = (sorted(a), sorted(b));
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = (n * m / (n + m)).sqrt();
    let p_value = special::kolmogorov_sf((ne + 0.12 + 0.11 / ne) * d);
    Ok(KsTest { statistic: d, p_value })
}

/// Max-deviation distance between binned frequencies and exact bin masses;
/// `edges` are the interior bin boundaries.
pub fn tv_binned(sample: &[f64], edges: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::Empty("sample"));
    }
    let mut counts = vec![0u64; edges.len() + 1];
    for &x in sample {
        counts[edges.partition_point(|&e| e < x)] += 1;
    }
    let mut probs = Vec::with_capacity(counts.len());
    let mut prev = 0.0;
    for &e in edges {
        let c = cdf(e);
        probs.push(c - prev);
        prev = c;
    }
    probs.push(1.0 - prev);
    tv_from_counts(&counts, &probs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
}

/// Pearson goodness of fit of `counts` against bin probabilities.
pub fn chi_square_gof(counts: &[u64], probs: &[f64]) -> Result<ChiSquareTest> {
    if counts.len() != probs.len() {
        return Err(Error::DimensionMismatch { expected: probs.len(), got: counts.len() });
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(Error::Empty("counts"));
    }
    let mut stat = 0.0;
    let mut bins = 0;
    for (&c, &p) in counts.iter().zip(probs) {
        let e = p * n as f64;
        if e > 0.0 {
            stat += (c as f64 - e).powi(2) / e;
            bins += 1;
        } else if c > 0 {
            return Ok(ChiSquareTest { statistic: f64::INFINITY, dof: bins as f64, p_value: 0.0 });
        }
    }
    let dof = (bins.max(2) - 1) as f64;
    Ok(ChiSquareTest { statistic: stat, dof, p_value: special::chi_square_sf(stat, dof) })
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)
}

/// Median; the input is copied.
pub fn median(values: &[f64]) -> f64 {
    let v = sorted(values);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let v = sorted(values);
    let h = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}
