//! Target distributions and the built-in catalog.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use crate::cover::Region;
use crate::diagnostics::stationary_distribution;
use crate::error::{Error, Result};
use crate::linalg;
use crate::special;

/// A distribution known through its log-density.
///
/// `ln_density` is `-inf` off the support and finite on it. The optional
/// oracles (`region_mass`, `cdf`, `stationary`, `sample_exact`) exist for
/// targets where they are available in closed form.
pub trait Target: Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn ln_density(&self, x: &[f64]) -> f64;

    /// Smallest closed box containing the support.
    fn support(&self) -> Region;

    /// Integer-valued state space (first coordinate).
    fn is_lattice(&self) -> bool {
        false
    }

    /// Exact probability of a closed box.
    fn region_mass(&self, _region: &Region) -> Option<f64> {
        None
    }

    /// Exact CDF for one-dimensional targets.
    fn cdf(&self, _x: f64) -> Option<f64> {
        None
    }

    /// Exact probability vector for finite state spaces.
    fn stationary(&self) -> Option<&[f64]> {
        None
    }

    /// One exact draw, when an exact sampler exists.
    fn sample_exact(&self, _rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        None
    }
}

/// Gamma distribution with shape `k` and scale `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gamma {
    shape: f64,
    scale: f64,
    ln_norm: f64,
    sampler: rand_distr::Gamma<f64>,
}

impl Gamma {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma({shape}, {scale})")));
        }
        let sampler = rand_distr::Gamma::new(shape, scale)
            .map_err(|_| Error::InvalidParameter(format!("gamma({shape}, {scale})")))?;
        Ok(Self { shape, scale, ln_norm: -special::ln_gamma(shape) - shape * scale.ln(), sampler })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }

    fn cdf_at(&self, x: f64) -> f64 {
        special::gamma_p(self.shape, x / self.scale)
    }
}

impl Target for Gamma {
    fn name(&self) -> &str {
        "gamma"
    }

    fn dim(&self) -> usize {
        1
    }

    fn ln_density(&self, x: &[f64]) -> f64 {
        let x = x[0];
        if x < 0.0 || x.is_nan() {
            return f64::NEG_INFINITY;
        }
        if x == 0.0 {
            return if self.shape == 1.0 {
                self.ln_norm
            } else if self.shape > 1.0 {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            };
        }
        self.ln_norm + (self.shape - 1.0) * x.ln() - x / self.scale
    }

    fn support(&self) -> Region {
        Region::interval(0.0, f64::INFINITY)
    }

    fn region_mass(&self, region: &Region) -> Option<f64> {
        if region.is_empty() {
            return Some(0.0);
        }
        Some((self.cdf_at(region.hi()[0]) - self.cdf_at(region.lo()[0].max(0.0))).max(0.0))
    }

    fn cdf(&self, x: f64) -> Option<f64> {
        Some(self.cdf_at(x))
    }

    fn sample_exact(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        Some(vec![self.sampler.sample(rng)])
    }
}

/// Poisson distribution on the nonnegative integers.
#[derive(Debug, Clone, PartialEq)]
pub struct Poisson {
    rate: f64,
    sampler: rand_distr::Poisson<f64>,
}

impl Poisson {
    pub const DEFAULT_RATE: f64 = 14.0;

    pub fn new(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidParameter(format!("poisson rate {rate}")));
        }
        let sampler =
            rand_distr::Poisson::new(rate).map_err(|_| Error::InvalidParameter(format!("poisson rate {rate}")))?;
        Ok(Self { rate, sampler })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn pmf(&self, k: u64) -> f64 {
        self.ln_pmf(k).exp()
    }

    fn ln_pmf(&self, k: u64) -> f64 {
        k as f64 * self.rate.ln() - self.rate - special::ln_factorial(k)
    }

    /// `P(X ≤ k)`.
    pub fn cdf_at(&self, k: f64) -> f64 {
        if k < 0.0 {
            return 0.0;
        }
        special::gamma_q(k.floor() + 1.0, self.rate)
    }

    /// Probabilities of `0..len`.
    pub fn probabilities(&self, len: usize) -> Vec<f64> {
        (0..len as u64).map(|k| self.pmf(k)).collect()
    }
}

impl Target for Poisson {
    fn name(&self) -> &str {
        "poisson"
    }

    fn dim(&self) -> usize {
        1
    }

    fn ln_density(&self, x: &[f64]) -> f64 {
        let x = x[0];
        if !(x >= 0.0) || x.fract() != 0.0 || x.is_infinite() {
            return f64::NEG_INFINITY;
        }
        self.ln_pmf(x as u64)
    }

    fn support(&self) -> Region {
        Region::interval(0.0, f64::INFINITY)
    }

    fn is_lattice(&self) -> bool {
        true
    }

    fn region_mass(&self, region: &Region) -> Option<f64> {
        if region.is_empty() {
            return Some(0.0);
        }
        let lo = region.lo()[0].max(0.0).ceil();
        let hi = region.hi()[0].floor();
        if hi < lo {
            return Some(0.0);
        }
        Some((self.cdf_at(hi) - self.cdf_at(lo - 1.0)).max(0.0))
    }

    fn cdf(&self, x: f64) -> Option<f64> {
        Some(self.cdf_at(x))
    }

    fn sample_exact(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        Some(vec![self.sampler.sample(rng)])
    }
}

/// Row-stochastic transition matrix with cached cumulative rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    rows: Vec<Vec<f64>>,
    cumulative: Vec<Vec<f64>>,
}

impl TransitionKernel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Empty("transition matrix"));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::NotStochastic { row: i, sum });
            }
        }
        let cumulative = rows
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                row.iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(Self { rows, cumulative })
    }

    pub fn states(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Draws the next state from row `state`.
    pub fn propose<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        let cum = &self.cumulative[state];
        let u = rng.random::<f64>() * cum[cum.len() - 1];
        cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1)
    }
}

/// The seven-state chain with a bottleneck between states 2, 3 and 4
/// (0-based), parameterized by the bottleneck probability `a`.
pub fn seven_state_matrix(a: f64) -> Vec<Vec<f64>> {
    let t = 1.0 / 3.0;
    let b = (1.0 - a) / 3.0;
    let h = (1.0 - a) / 2.0;
    vec![
        vec![t, t, t, 0.0, 0.0, 0.0, 0.0],
        vec![t, t, t, 0.0, 0.0, 0.0, 0.0],
        vec![b, b, b, a, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, h, h, a, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, a, b, b, b],
        vec![0.0, 0.0, 0.0, 0.0, t, t, t],
        vec![0.0, 0.0, 0.0, 0.0, a, a, 1.0 - 2.0 * a],
    ]
}

/// A finite-state target given by the stationary law of a Markov chain.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteChain {
    kernel: TransitionKernel,
    stationary: Vec<f64>,
    ln_stationary: Vec<f64>,
}

impl DiscreteChain {
    /// Bottleneck probability of the hard seven-state case.
    pub const HARD_A: f64 = 0.003;
    /// Bottleneck probability of the nice seven-state case.
    pub const NICE_A: f64 = 0.03;

    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let kernel = TransitionKernel::new(rows)?;
        let stationary = stationary_distribution(kernel.rows())?;
        let ln_stationary = stationary.iter().map(|p| p.ln()).collect();
        Ok(Self { kernel, stationary, ln_stationary })
    }

    pub fn seven_state(a: f64) -> Result<Self> {
        if !(a > 0.0 && a < 0.5) {
            return Err(Error::InvalidParameter(format!("bottleneck probability {a} outside (0, 0.5)")));
        }
        Self::new(seven_state_matrix(a))
    }

    pub fn kernel(&self) -> &TransitionKernel {
        &self.kernel
    }

    pub fn states(&self) -> usize {
        self.stationary.len()
    }

    /// Stationary law `λ`.
    pub fn stationary_law(&self) -> &[f64] {
        &self.stationary
    }
}

impl Target for DiscreteChain {
    fn name(&self) -> &str {
        "discrete"
    }

    fn dim(&self) -> usize {
        1
    }

    fn ln_density(&self, x: &[f64]) -> f64 {
        let v = x[0];
        if v >= 0.0 && v.fract() == 0.0 && (v as usize) < self.states() {
            self.ln_stationary[v as usize]
        } else {
            f64::NEG_INFINITY
        }
    }

    fn support(&self) -> Region {
        Region::interval(0.0, (self.states() - 1) as f64)
    }

    fn is_lattice(&self) -> bool {
        true
    }

    fn region_mass(&self, region: &Region) -> Option<f64> {
        Some(
            (0..self.states())
                .filter(|&s| region.covers(&[s as f64]))
                .map(|s| self.stationary[s])
                .sum(),
        )
    }

    fn stationary(&self) -> Option<&[f64]> {
        Some(&self.stationary)
    }

    fn sample_exact(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (s, p) in self.stationary.iter().enumerate() {
            acc += p;
            if u < acc {
                return Some(vec![s as f64]);
            }
        }
        Some(vec![(self.states() - 1) as f64])
    }
}

/// Mixture of multivariate normal components.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    dim: usize,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    chol: Vec<Vec<Vec<f64>>>,
    // Per component: ln(weight) - ln det(L) - dim/2 ln(2π).
    ln_consts: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, covs: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() || weights.len() != covs.len() {
            return Err(Error::InvalidParameter("mixture weights, means and covariances must align".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter("mixture weights must be positive and sum to 1".into()));
        }
        let dim = means[0].len();
        if dim == 0 {
            return Err(Error::InvalidParameter("mixture dimension must be positive".into()));
        }
        let mut chol = Vec::with_capacity(covs.len());
        let mut ln_consts = Vec::with_capacity(covs.len());
        for ((w, m), c) in weights.iter().zip(&means).zip(&covs) {
            if m.len() != dim || c.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: m.len().min(c.len()) });
            }
            let l = linalg::cholesky(c)?;
            if (0..dim).any(|i| l[i][i] <= 0.0) {
                return Err(Error::InvalidParameter("mixture covariance must be positive definite".into()));
            }
            let ln_det: f64 = (0..dim).map(|i| l[i][i].ln()).sum();
            ln_consts.push(w.ln() - ln_det - 0.5 * dim as f64 * (2.0 * core::f64::consts::PI).ln());
            chol.push(l);
        }
        Ok(Self { dim, weights, means, chol, ln_consts })
    }

    /// Two well-separated modes in the plane.
    pub fn two_dim_example() -> Self {
        let cov = vec![vec![0.5, 0.1], vec![0.1, 0.5]];
        Self::new(vec![0.6, 0.4], vec![vec![-2.0, -1.0], vec![2.5, 2.0]], vec![cov.clone(), cov]).expect("valid mixture")
    }

    /// A five-dimensional mixture with one dominant and several minor components.
    pub fn five_dim_example() -> Self {
        let eye = |s: f64| -> Vec<Vec<f64>> {
            (0..5).map(|i| (0..5).map(|j| if i == j { s } else { 0.0 }).collect()).collect()
        };
        Self::new(
            vec![0.45, 0.25, 0.2, 0.1],
            vec![
                vec![0.0; 5],
                vec![3.0, 3.0, 0.0, 0.0, 0.0],
                vec![-3.0, 0.0, 3.0, 0.0, 0.0],
                vec![0.0, -3.0, -3.0, 2.0, 2.0],
            ],
            vec![eye(1.0), eye(0.5), eye(0.7), eye(0.4)],
        )
        .expect("valid mixture")
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    /// CDF of coordinate `d`.
    pub fn marginal_cdf(&self, d: usize, x: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.chol)
            .map(|((w, m), l)| {
                let sd = l[d].iter().map(|v| v * v).sum::<f64>().sqrt();
                w * special::normal_cdf((x - m[d]) / sd)
            })
            .sum()
    }

    fn component_ln(&self, c: usize, x: &[f64]) -> f64 {
        // Forward substitution L z = x - μ.
        let l = &self.chol[c];
        let mut z = vec![0.0; self.dim];
        let mut quad = 0.0;
        for i in 0..self.dim {
            let s: f64 = (0..i).map(|k| l[i][k] * z[k]).sum();
            z[i] = (x[i] - self.means[c][i] - s) / l[i][i];
            quad += z[i] * z[i];
        }
        self.ln_consts[c] - 0.5 * quad
    }
}

impl Target for GaussianMixture {
    fn name(&self) -> &str {
        "gmm"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn ln_density(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> = (0..self.weights.len()).map(|c| self.component_ln(c, x)).collect();
        special::log_sum_exp(&terms)
    }

    fn support(&self) -> Region {
        Region::unbounded(self.dim)
    }

    fn sample_exact(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut comp = self.weights.len() - 1;
        for (c, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                comp = c;
                break;
            }
        }
        let z: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(rng)).collect();
        let lz = linalg::lower_mul(&self.chol[comp], &z);
        Some(lz.iter().zip(&self.means[comp]).map(|(a, m)| a + m).collect())
    }
}

/// Uniform distribution on a bounded box.
#[derive(Debug, Clone, PartialEq)]
pub struct Uniform {
    region: Region,
    ln_density: f64,
}

impl Uniform {
    pub fn new(region: Region) -> Result<Self> {
        let widths: Vec<f64> = region.lo().iter().zip(region.hi()).map(|(l, h)| h - l).collect();
        if widths.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter("uniform needs a bounded box with positive widths".into()));
        }
        let ln_density = -widths.iter().map(|w| w.ln()).sum::<f64>();
        Ok(Self { region, ln_density })
    }
}

impl Target for Uniform {
    fn name(&self) -> &str {
        "uniform"
    }

    fn dim(&self) -> usize {
        self.region.dim()
    }

    fn ln_density(&self, x: &[f64]) -> f64 {
        if self.region.covers(x) {
            self.ln_density
        } else {
            f64::NEG_INFINITY
        }
    }

    fn support(&self) -> Region {
        self.region.clone()
    }

    fn region_mass(&self, region: &Region) -> Option<f64> {
        let r = region.intersection(&self.region);
        if r.is_empty() {
            return Some(0.0);
        }
        Some(r.lo().iter().zip(r.hi()).map(|(l, h)| h - l).product::<f64>() * self.ln_density.exp())
    }

    fn cdf(&self, x: f64) -> Option<f64> {
        if self.region.dim() != 1 {
            return None;
        }
        let (l, h) = (self.region.lo()[0], self.region.hi()[0]);
        Some(((x - l) / (h - l)).clamp(0.0, 1.0))
    }

    fn sample_exact(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        Some(
            self.region
                .lo()
                .iter()
                .zip(self.region.hi())
                .map(|(l, h)| l + (h - l) * rng.random::<f64>())
                .collect(),
        )
    }
}

/// Parameters of a built-in target.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    Gamma { shape: f64, scale: f64 },
    Poisson { rate: f64 },
    SevenState { a: f64 },
    GaussianMixture { weights: Vec<f64>, means: Vec<Vec<f64>>, covs: Vec<Vec<Vec<f64>>> },
}

impl TargetSpec {
    pub fn build(&self) -> Result<Box<dyn Target>> {
        Ok(match self {
            TargetSpec::Gamma { shape, scale } => Box::new(Gamma::new(*shape, *scale)?),
            TargetSpec::Poisson { rate } => Box::new(Poisson::new(*rate)?),
            TargetSpec::SevenState { a } => Box::new(DiscreteChain::seven_state(*a)?),
            TargetSpec::GaussianMixture { weights, means, covs } => {
                Box::new(GaussianMixture::new(weights.clone(), means.clone(), covs.clone())?)
            }
        })
    }
}

/// An entry of the built-in catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub default: TargetSpec,
}

/// Built-in targets with their default parameters.
pub fn builtin_targets() -> Vec<CatalogEntry> {
    let gmm = GaussianMixture::two_dim_example();
    let covs = gmm
        .chol
        .iter()
        .map(|l| {
            (0..gmm.dim)
                .map(|i| (0..gmm.dim).map(|j| (0..gmm.dim).map(|k| l[i][k] * l[j][k]).sum()).collect())
                .collect()
        })
        .collect();
    vec![
        CatalogEntry {
            name: "gamma",
            summary: "gamma(shape, scale) on the positive reals",
            default: TargetSpec::Gamma { shape: 4.0, scale: 1.0 },
        },
        CatalogEntry {
            name: "poisson",
            summary: "Poisson(rate) on the nonnegative integers",
            default: TargetSpec::Poisson { rate: Poisson::DEFAULT_RATE },
        },
        CatalogEntry {
            name: "discrete",
            summary: "stationary law of the seven-state bottleneck chain",
            default: TargetSpec::SevenState { a: DiscreteChain::HARD_A },
        },
        CatalogEntry {
            name: "gmm",
            summary: "Gaussian mixture (two-dimensional default)",
            default: TargetSpec::GaussianMixture { weights: gmm.weights.clone(), means: gmm.means.clone(), covs },
        },
    ]
}
