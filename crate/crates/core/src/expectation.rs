//! Expectations from subset samples and exclusive weights.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::proportion::ProportionEstimate;
use crate::samplers::SubsetSample;

type IntegrandFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A named function of a point.
pub struct Integrand {
    name: String,
    func: Box<IntegrandFn>,
}

impl core::fmt::Debug for Integrand {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Integrand").field("name", &self.name).finish_non_exhaustive()
    }
}

impl Integrand {
    pub fn new(name: impl Into<String>, func: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), func: Box::new(func) }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(alloc::format!("{c}"), move |_| c)
    }

    /// Coordinate `d` of the point.
    pub fn coordinate(d: usize) -> Self {
        Self::new(alloc::format!("x{d}"), move |x| x[d])
    }

    /// `x_d^p`.
    pub fn power(d: usize, p: i32) -> Self {
        Self::new(alloc::format!("x{d}^{p}"), move |x| x[d].powi(p))
    }

    /// Indicator of the first coordinate equal to `state`.
    pub fn indicator(state: usize) -> Self {
        let s = state as f64;
        Self::new(alloc::format!("1{{x={state}}}"), move |x| if x[0] == s { 1.0 } else { 0.0 })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.func)(x)
    }
}

/// Estimator form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EstimatorForm {
    /// Mean of `h` over the eligible draws of each chain, weighted by the
    /// exclusive weight. Consistent.
    #[default]
    Conditional,
    /// Average of `h · 1(eligible) · weight` over all draws of each chain.
    /// Biased by the eligible fraction; kept for comparison.
    Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub weight: f64,
    pub eligible: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationEstimate {
    pub name: String,
    pub estimate: f64,
    /// Batch-means standard error from the per-part means only.
    pub stderr: f64,
    pub per_part: Vec<PartEstimate>,
    /// Always set: uncertainty in the weights is not part of `stderr`.
    pub weights_uncertainty_ignored: bool,
}

/// Batch-means standard error of the mean of a correlated series.
pub fn batch_means_stderr(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let batches = (n as f64).sqrt().floor().max(2.0) as usize;
    let size = n / batches;
    if size == 0 {
        return 0.0;
    }
    let means: Vec<f64> =
        (0..batches).map(|b| values[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64).collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}

pub fn estimate_expectation(
    h: &Integrand,
    samples: &[SubsetSample],
    props: &ProportionEstimate,
) -> Result<ExpectationEstimate> {
    estimate_expectation_with(h, samples, props, EstimatorForm::Conditional)
}

pub fn estimate_expectation_with(
    h: &Integrand,
    samples: &[SubsetSample],
    props: &ProportionEstimate,
    form: EstimatorForm,
) -> Result<ExpectationEstimate> {
    if samples.is_empty() {
        return Err(Error::Empty("subset samples"));
    }
    if samples.len() != props.parts() {
        return Err(Error::InvalidParameter("samples and proportions disagree on the number of parts".into()));
    }
    let mut per_part = Vec::with_capacity(samples.len());
    let (mut estimate, mut var) = (0.0, 0.0);
    for (j, s) in samples.iter().enumerate() {
        let values: Vec<f64> =
            s.rows().zip(&s.prior_overlap).filter(|(_, p)| !**p).map(|(x, _)| h.eval(x)).collect();
        if values.is_empty() {
            return Err(Error::NoEligibleDraws { part: j });
        }
        let weight = props.exclusive[j];
        let (mean, stderr) = match form {
            EstimatorForm::Conditional => {
                (values.iter().sum::<f64>() / values.len() as f64, batch_means_stderr(&values))
            }
            EstimatorForm::Literal => {
                let scale = values.len() as f64 / s.len() as f64;
                (values.iter().sum::<f64>() / s.len() as f64, batch_means_stderr(&values) * scale)
            }
        };
        estimate += weight * mean;
        var += (weight * stderr).powi(2);
        per_part.push(PartEstimate { mean, stderr, weight, eligible: values.len() });
    }
    Ok(ExpectationEstimate {
        name: h.name.clone(),
        estimate,
        stderr: var.sqrt(),
        per_part,
        weights_uncertainty_ignored: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::{LinkedCover, Region};
    use crate::proportion::estimate_proportions;
    use alloc::vec;

    fn setup() -> (Vec<SubsetSample>, ProportionEstimate) {
        let cover = LinkedCover::linked(
            Region::interval(0.0, 1.0),
            vec![Region::interval(0.0, 0.55), Region::interval(0.45, 1.0)],
        )
        .unwrap();
        let a = SubsetSample::from_draws(&cover, 0, vec![0.1, 0.5, 0.2, 0.3], 1.0, 0).unwrap();
        let b = SubsetSample::from_draws(&cover, 1, vec![0.9, 0.5, 0.7, 0.6], 1.0, 0).unwrap();
        let s = vec![a, b];
        let p = estimate_proportions(&s, &cover).unwrap();
        (s, p)
    }

    #[test]
    fn constant_integrates_to_one() {
        let (s, p) = setup();
        let e = estimate_expectation(&Integrand::constant(1.0), &s, &p).unwrap();
        assert!((e.estimate - 1.0).abs() < 1e-15);
        assert!(e.weights_uncertainty_ignored);
    }

    #[test]
    fn single_part_is_plain_mean() {
        let cover = LinkedCover::single(Region::interval(0.0, 1.0));
        let s = vec![SubsetSample::from_draws(&cover, 0, vec![0.1, 0.2, 0.6], 1.0, 0).unwrap()];
        let p = estimate_proportions(&s, &cover).unwrap();
        let e = estimate_expectation(&Integrand::coordinate(0), &s, &p).unwrap();
        assert!((e.estimate - 0.3).abs() < 1e-15);
    }

    #[test]
    fn literal_form_undercounts() {
        let (s, p) = setup();
        let c = estimate_expectation(&Integrand::constant(1.0), &s, &p).unwrap();
        let l = estimate_expectation_with(&Integrand::constant(1.0), &s, &p, EstimatorForm::Literal).unwrap();
        assert!(l.estimate < c.estimate);
    }

    #[test]
    fn batch_means_of_constant_is_zero() {
        assert_eq!(batch_means_stderr(&[2.0; 100]), 0.0);
        assert_eq!(batch_means_stderr(&[1.0]), 0.0);
    }
}
