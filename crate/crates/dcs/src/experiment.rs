//! Benchmark experiments: configuration, pipelines and summary tables.

use std::path::{Path, PathBuf};

use dcs_core::cover::{estimate_cover, Cover, CoverEstimation, DiscreteCover, LinkedCover, Region};
use dcs_core::diagnostics::{ks_distance, mean, tv_discrete_values, variance};
use dcs_core::merge::{merge, merge_weighted, merge_with_reuse, MergedSample};
use dcs_core::pmmh::{
    pilot_covariance, pmmh_chain, simulate_sv, sv_cover, PmmhChain, PmmhConfig, ReturnSeries, SVParams,
};
use dcs_core::proportion::{
    estimate_proportions, failure_bound, true_proportions, true_proportions_discrete, ProportionEstimate,
};
use dcs_core::rng::{derive_seed, stream};
use dcs_core::samplers::{
    default_scale, gamma_envelope, subset_rejection, Proposal, SubsetChainConfig, SubsetSample,
};
use dcs_core::target::{DiscreteChain, Gamma, GaussianMixture, Poisson, Target};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::runtime::{part_seed, rosenthal, run_workers, sample_parts, timed, Timed};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "DCS_OUTPUT_DIR";

/// Stream of the simulated return series.
const DATA_STREAM: u64 = 0x5356_4441;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Gamma,
    Discrete,
    Poisson,
    Sv,
    Gmm,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Gamma => "gamma",
            Experiment::Discrete => "discrete",
            Experiment::Poisson => "poisson",
            Experiment::Sv => "sv",
            Experiment::Gmm => "gmm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dc,
    Standard,
    Rosenthal,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Dc => "MH-DC",
            Method::Standard => "MH-Standard",
            Method::Rosenthal => "MH-R",
        }
    }

    fn rank(self) -> u8 {
        match self {
            Method::Standard => 0,
            Method::Rosenthal => 1,
            Method::Dc => 2,
        }
    }
}

/// Sampler used inside each part (gamma only; the other experiments fix it).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Mh,
    Rejection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MergeVariant {
    Downsample,
    Weighted,
    Reuse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub method: Method,
    /// Number of parts `W`.
    pub parts: usize,
    /// Draws per chain `M`.
    #[serde(rename = "M")]
    pub m: usize,
    /// Overlap mass for cover estimation.
    pub delta: Option<f64>,
    /// Pilot draws for cover estimation; `None` keeps the fixed cover. For
    /// `sv` it is the length of the full-space pilot run that sets the
    /// proposal covariance.
    pub pilot: Option<usize>,
    /// Total draws of a standard run; defaults to `W · M`.
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub seed: u64,
    /// Repetitions (`poisson` batches).
    pub batches: usize,
    pub sampler: SamplerKind,
    pub merge: MergeVariant,
    pub shape: f64,
    pub scale: f64,
    pub rate: f64,
    /// Bottleneck probability of the seven-state chain.
    pub a: f64,
    /// Mixture dimension (2 or 5).
    pub dims: usize,
    /// Length of the simulated return series.
    pub t: usize,
    pub particles: usize,
    /// Return-series CSV replacing the simulated data.
    pub returns: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults of one experiment.
    pub fn for_experiment(experiment: Experiment) -> Self {
        let mut c = Self {
            experiment,
            method: Method::Dc,
            parts: 2,
            m: 10_000,
            delta: None,
            pilot: None,
            n: None,
            seed: 1,
            batches: 1,
            sampler: SamplerKind::Mh,
            merge: MergeVariant::Downsample,
            shape: 4.0,
            scale: 1.0,
            rate: Poisson::DEFAULT_RATE,
            a: DiscreteChain::HARD_A,
            dims: 2,
            t: 200,
            particles: 100,
            returns: None,
            output: None,
        };
        match experiment {
            Experiment::Gamma => c.parts = 3,
            Experiment::Discrete => {}
            Experiment::Poisson => {
                c.m = 1000;
                c.batches = 1000;
            }
            Experiment::Sv => {
                c.m = 2000;
                c.pilot = Some(500);
            }
            Experiment::Gmm => {
                c.parts = 4;
                c.pilot = Some(2000);
                c.delta = Some(0.05);
            }
        }
        c
    }

    /// Defaults of `experiment` overlaid with the keys of a JSON document.
    pub fn from_json(experiment: Experiment, text: &str) -> Result<Self> {
        let mut base = serde_json::to_value(Self::for_experiment(experiment))?;
        let overlay: serde_json::Value = serde_json::from_str(text)?;
        let serde_json::Value::Object(map) = overlay else {
            return Err(Error::Config("configuration must be a JSON object".into()));
        };
        if let Some(tag) = map.get("experiment") {
            let tag: Experiment = serde_json::from_value(tag.clone())?;
            if tag != experiment {
                base = serde_json::to_value(Self::for_experiment(tag))?;
            }
        }
        let serde_json::Value::Object(base_map) = &mut base else { unreachable!() };
        base_map.extend(map);
        Ok(serde_json::from_value(base)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.parts == 0 {
            return Err(Error::Config("W must be at least 1".into()));
        }
        if self.m == 0 {
            return Err(Error::Config("M must be at least 1".into()));
        }
        if self.pilot.is_some() && self.experiment != Experiment::Sv && !self.delta.is_none_or(|d| d > 0.0) {
            return Err(Error::Config("delta must be positive when the cover is estimated".into()));
        }
        if self.batches == 0 {
            return Err(Error::Config("batches must be at least 1".into()));
        }
        let fixed = match self.experiment {
            Experiment::Discrete | Experiment::Poisson | Experiment::Sv => Some(2),
            Experiment::Gamma if self.pilot.is_none() => Some(3),
            _ => None,
        };
        if let Some(w) = fixed {
            if self.parts != w {
                return Err(Error::Config(format!(
                    "the fixed {} cover has {w} parts, not {}",
                    self.experiment.name(),
                    self.parts
                )));
            }
        }
        if self.experiment == Experiment::Gmm && self.pilot.is_none() {
            return Err(Error::Config("gmm covers are estimated; set a pilot size".into()));
        }
        Ok(())
    }

    fn standard_draws(&self) -> usize {
        self.n.unwrap_or(self.parts * self.m)
    }
}

/// Output of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub experiment: Experiment,
    pub method: Method,
    /// Seven-state bottleneck probability, for table grouping.
    pub a: Option<f64>,
    /// Draws in the final sample (mean per batch for `poisson`).
    #[serde(rename = "N")]
    pub n: usize,
    /// Max worker wall time (summed over batches).
    pub runtime_s: f64,
    pub worker_s: Vec<f64>,
    /// Proportion estimation and merging.
    pub merge_s: f64,
    /// `tv` for discrete targets, `ks` for continuous ones.
    pub metric: String,
    /// Metric value (mean over batches for `poisson`).
    pub tv: Option<f64>,
    /// Standard error of `tv` over batches.
    pub tv_se: Option<f64>,
}

impl RunSummary {
    pub fn tv_times_n(&self) -> Option<f64> {
        self.tv.map(|t| t * self.n as f64)
    }
}

fn seven_state_cover() -> DiscreteCover {
    DiscreteCover::linked(7, vec![vec![0, 1, 2, 3], vec![3, 4, 5, 6]]).expect("fixed discrete cover")
}

/// The three-part gamma cover with overlaps `[3.45, 3.55]` and `[7.45, 7.55]`.
pub fn gamma_fixed_cover() -> LinkedCover {
    LinkedCover::linked(
        Region::interval(0.0, f64::INFINITY),
        vec![Region::interval(0.0, 3.55), Region::interval(3.45, 7.55), Region::interval(7.45, f64::INFINITY)],
    )
    .expect("fixed gamma cover")
}

/// Poisson cover split at the mode: `[0, mode]` and `[mode, ∞)`.
pub fn poisson_cover(rate: f64) -> LinkedCover {
    let mode = rate.floor();
    LinkedCover::linked(
        Region::interval(0.0, f64::INFINITY),
        vec![Region::interval(0.0, mode), Region::interval(mode, f64::INFINITY)],
    )
    .expect("split cover")
}

/// Most probable state of each part.
fn part_modes(lambda: &[f64], cover: &DiscreteCover) -> Vec<usize> {
    cover
        .parts()
        .iter()
        .map(|p| *p.iter().max_by(|&&a, &&b| lambda[a].total_cmp(&lambda[b]).then(b.cmp(&a))).expect("nonempty part"))
        .collect()
}

fn surface_failure(err: dcs_core::Error, p_worst: Option<f64>, m: usize, parts: usize) -> Error {
    match err {
        dcs_core::Error::Failure { overlap, part } => Error::Failure {
            overlap,
            part,
            m,
            bound: p_worst.map_or(f64::NAN, |p| failure_bound(p, m, parts)),
        },
        e => e.into(),
    }
}

/// Proportions and merged sample, timed together.
struct Merged {
    props: ProportionEstimate,
    sample: MergedSample,
    seconds: f64,
}

fn merge_samples<C: Cover + ?Sized>(
    samples: &[SubsetSample],
    cover: &C,
    variant: MergeVariant,
    seed: u64,
    p_worst: Option<f64>,
) -> Result<Merged> {
    let m = samples.first().map_or(0, |s| s.len());
    let (out, seconds) = timed(|| -> Result<(ProportionEstimate, MergedSample)> {
        let props = estimate_proportions(samples, cover).map_err(|e| surface_failure(e, p_worst, m, cover.len()))?;
        let n_out = m;
        let sample = match variant {
            MergeVariant::Downsample => merge(samples, &props, seed)?,
            MergeVariant::Weighted => merge_weighted(samples, &props, n_out, seed)?,
            MergeVariant::Reuse => merge_with_reuse(samples, &props, cover, n_out, seed)?,
        };
        Ok((props, sample))
    });
    let (props, sample) = out?;
    Ok(Merged { props, sample, seconds })
}

/// Files of one run, written only when an output directory is set.
struct Sink<'a>(Option<&'a Path>);

impl Sink<'_> {
    fn path(&self, name: &str) -> Option<PathBuf> {
        self.0.map(|d| d.join(name))
    }

    fn samples(&self, samples: &[SubsetSample]) -> Result<()> {
        for s in samples {
            if let Some(p) = self.path(&format!("sample_{}.csv", s.part)) {
                io::write_sample(&p, s)?;
            }
        }
        Ok(())
    }

    fn merged(&self, m: &Merged) -> Result<()> {
        if let Some(p) = self.path("proportions.json") {
            io::write_proportions(&p, &m.props)?;
        }
        if let Some(p) = self.path("merged.csv") {
            io::write_merged(&p, &m.sample)?;
        }
        Ok(())
    }

    fn draws(&self, name: &str, samples: &[SubsetSample]) -> Result<()> {
        if let Some(p) = self.path(name) {
            let values: Vec<f64> = samples.iter().flat_map(|s| s.draws.iter().copied()).collect();
            io::write_column(&p, "x0", &values)?;
        }
        Ok(())
    }

    fn cover(&self, cover: &io::CoverFile) -> Result<()> {
        if let Some(p) = self.path("cover.json") {
            io::write_cover(&p, cover)?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    metric: &'a str,
    value: Option<f64>,
    stderr: Option<f64>,
    #[serde(rename = "N")]
    n: usize,
    target: String,
}

#[derive(Serialize)]
struct Timing<'a> {
    runtime_s: f64,
    worker_s: &'a [f64],
    merge_s: f64,
}

/// Runs the configured pipeline. When `config.output` is set, writes the
/// resolved configuration, the cover, per-part draws, proportions, the merged
/// sample, `diagnostics.json`, `timing.json` and a one-row `summary.csv`.
/// Everything except the two timing files is a function of the configuration.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary> {
    config.validate()?;
    let dir = config.output.as_deref();
    if let Some(d) = dir {
        io::write_json(&d.join("config.json"), config)?;
    }
    let sink = Sink(dir);
    let summary = match config.experiment {
        Experiment::Discrete => run_discrete(config, &sink)?,
        Experiment::Gamma => run_gamma(config, &sink)?,
        Experiment::Poisson => run_poisson(config, &sink)?,
        Experiment::Gmm => run_gmm(config, &sink)?,
        Experiment::Sv => run_sv(config, &sink)?,
    };
    if let Some(d) = dir {
        io::write_json(
            &d.join("diagnostics.json"),
            &Diagnostics {
                metric: &summary.metric,
                value: summary.tv,
                stderr: summary.tv_se,
                n: summary.n,
                target: target_label(config),
            },
        )?;
        io::write_json(
            &d.join("timing.json"),
            &Timing { runtime_s: summary.runtime_s, worker_s: &summary.worker_s, merge_s: summary.merge_s },
        )?;
        io::write_json(&d.join("summary.json"), &summary)?;
        emit_summary(std::slice::from_ref(&summary), &d.join("summary.csv"))?;
    }
    Ok(summary)
}

fn target_label(c: &ExperimentConfig) -> String {
    match c.experiment {
        Experiment::Gamma => format!("gamma(shape={}, scale={})", c.shape, c.scale),
        Experiment::Discrete => format!("seven-state(a={})", c.a),
        Experiment::Poisson => format!("poisson(rate={})", c.rate),
        Experiment::Sv => "stochastic volatility posterior".into(),
        Experiment::Gmm => format!("gaussian mixture ({} dims)", c.dims),
    }
}

fn summary(config: &ExperimentConfig, metric: &str, n: usize, workers: Vec<f64>, merge_s: f64, tv: Option<f64>) -> RunSummary {
    RunSummary {
        experiment: config.experiment,
        method: config.method,
        a: (config.experiment == Experiment::Discrete).then_some(config.a),
        n,
        runtime_s: workers.iter().cloned().fold(0.0, f64::max),
        worker_s: workers,
        merge_s,
        metric: metric.into(),
        tv,
        tv_se: None,
    }
}

fn run_discrete(config: &ExperimentConfig, sink: &Sink) -> Result<RunSummary> {
    let target = DiscreteChain::seven_state(config.a)?;
    let lambda = target.stationary_law().to_vec();
    let kernel = Proposal::Kernel(target.kernel().clone());
    match config.method {
        Method::Dc => {
            let cover = seven_state_cover();
            sink.cover(&io::CoverFile::Discrete(cover.clone()))?;
            let starts = part_modes(&lambda, &cover);
            let configs: Vec<SubsetChainConfig> = (0..cover.len())
                .map(|j| {
                    SubsetChainConfig::new(j, kernel.clone(), config.m, part_seed(config.seed, j))
                        .with_start(vec![starts[j] as f64])
                })
                .collect();
            let run = sample_parts(&target, &cover, &configs)?;
            sink.samples(&run.outputs)?;
            let p_worst = true_proportions_discrete(&lambda, &cover)?.p_worst();
            let merged =
                merge_samples(&run.outputs, &cover, config.merge, derive_seed(config.seed, stream::MERGE_KEEP), Some(p_worst))?;
            sink.merged(&merged)?;
            let tv = tv_discrete_values(&merged.sample.first_coordinate(), &lambda)?.tv;
            Ok(summary(config, "tv", merged.sample.len(), run.seconds, merged.seconds, Some(tv)))
        }
        Method::Standard => {
            let full = DiscreteCover::linked(7, vec![(0..7).collect()])?;
            let start = part_modes(&lambda, &full)[0];
            let n = config.standard_draws();
            let cfg = SubsetChainConfig::new(0, kernel, n, part_seed(config.seed, 0)).with_start(vec![start as f64]);
            let run = sample_parts(&target, &full, std::slice::from_ref(&cfg))?;
            sink.draws("chain.csv", &run.outputs)?;
            let tv = tv_discrete_values(&run.outputs[0].draws, &lambda)?.tv;
            Ok(summary(config, "tv", n, run.seconds, 0.0, Some(tv)))
        }
        Method::Rosenthal => {
            let starts: Vec<Vec<f64>> =
                part_modes(&lambda, &seven_state_cover()).into_iter().map(|s| vec![s as f64]).collect();
            let run = rosenthal(&target, &kernel, &starts, config.m, config.m / 10, config.seed)?;
            sink.draws("chains.csv", &run.outputs)?;
            let all: Vec<f64> = run.outputs.iter().flat_map(|s| s.draws.iter().copied()).collect();
            let tv = tv_discrete_values(&all, &lambda)?.tv;
            Ok(summary(config, "tv", all.len(), run.seconds, 0.0, Some(tv)))
        }
    }
}

fn gamma_cover(config: &ExperimentConfig, target: &dyn Target) -> Result<LinkedCover> {
    match config.pilot {
        None => Ok(gamma_fixed_cover()),
        Some(pilot) => {
            let mut settings = CoverEstimation::new(pilot, config.parts);
            settings.delta = config.delta;
            Ok(estimate_cover(target, &settings, derive_seed(config.seed, stream::PILOT))?)
        }
    }
}

/// Independent draws of a gamma law restricted to each part of `cover`.
pub fn gamma_rejection_parts(gamma: &Gamma, cover: &LinkedCover, m: usize, seed: u64) -> Result<Timed<SubsetSample>> {
    run_workers(cover.len(), |j| {
        let envelope = gamma_envelope(gamma, cover.part(j))?;
        Ok(subset_rejection(gamma, envelope.as_ref(), cover, j, m, part_seed(seed, j))?)
    })
}

fn gamma_mh_configs(gamma: &Gamma, cover: &LinkedCover, m: usize, seed: u64) -> Vec<SubsetChainConfig> {
    let sd = gamma.shape().sqrt() * gamma.scale();
    (0..cover.len())
        .map(|j| {
            let scale = default_scale(cover.part(j), &[sd]);
            SubsetChainConfig::new(j, Proposal::RandomWalk { scale }, m, part_seed(seed, j)).with_burn_in(m / 10)
        })
        .collect()
}

fn ks_of(values: &[f64], target: &dyn Target) -> Result<f64> {
    Ok(ks_distance(values, |x| target.cdf(x).expect("target has a CDF"))?)
}

fn run_gamma(config: &ExperimentConfig, sink: &Sink) -> Result<RunSummary> {
    let gamma = Gamma::new(config.shape, config.scale)?;
    let sd = gamma.shape().sqrt() * gamma.scale();
    match config.method {
        Method::Dc => {
            let cover = gamma_cover(config, &gamma)?;
            sink.cover(&io::CoverFile::Continuous(cover.clone()))?;
            let run = match config.sampler {
                SamplerKind::Rejection => gamma_rejection_parts(&gamma, &cover, config.m, config.seed)?,
                SamplerKind::Mh => sample_parts(&gamma, &cover, &gamma_mh_configs(&gamma, &cover, config.m, config.seed))?,
            };
            sink.samples(&run.outputs)?;
            let p_worst = true_proportions(&gamma, &cover).ok().map(|t| t.p_worst());
            let merged = merge_samples(&run.outputs, &cover, config.merge, derive_seed(config.seed, stream::MERGE_KEEP), p_worst)?;
            sink.merged(&merged)?;
            let ks = ks_of(&merged.sample.first_coordinate(), &gamma)?;
            Ok(summary(config, "ks", merged.sample.len(), run.seconds, merged.seconds, Some(ks)))
        }
        Method::Standard => {
            let full = LinkedCover::single(gamma.support());
            let n = config.standard_draws();
            let cfg = SubsetChainConfig::new(0, Proposal::RandomWalk { scale: vec![sd] }, n, part_seed(config.seed, 0))
                .with_burn_in(n / 10);
            let run = sample_parts(&gamma, &full, std::slice::from_ref(&cfg))?;
            sink.draws("chain.csv", &run.outputs)?;
            let ks = ks_of(&run.outputs[0].draws, &gamma)?;
            Ok(summary(config, "ks", n, run.seconds, 0.0, Some(ks)))
        }
        Method::Rosenthal => {
            let cover = gamma_cover(config, &gamma)?;
            let starts: Vec<Vec<f64>> = cover.parts().iter().map(|p| p.anchor(&[sd])).collect();
            let run = rosenthal(&gamma, &Proposal::RandomWalk { scale: vec![sd] }, &starts, config.m, config.m / 10, config.seed)?;
            sink.draws("chains.csv", &run.outputs)?;
            let all: Vec<f64> = run.outputs.iter().flat_map(|s| s.draws.iter().copied()).collect();
            let ks = ks_of(&all, &gamma)?;
            Ok(summary(config, "ks", all.len(), run.seconds, 0.0, Some(ks)))
        }
    }
}

/// Total variation of one Poisson batch against the exact law.
fn poisson_tv(values: &[f64], poisson: &Poisson) -> Result<f64> {
    let top = values.iter().cloned().fold(0.0, f64::max) as usize;
    let len = (top + 1).max((poisson.rate() + 20.0 * poisson.rate().sqrt() + 20.0) as usize);
    Ok(tv_discrete_values(values, &poisson.probabilities(len))?.tv)
}

/// One Poisson batch: the metric, the sample size, worker times and merge time.
fn poisson_batch(config: &ExperimentConfig, poisson: &Poisson, cover: &LinkedCover, seed: u64) -> Result<(f64, usize, Vec<f64>, f64)> {
    let mode = poisson.rate().floor();
    match config.method {
        Method::Dc => {
            let configs: Vec<SubsetChainConfig> = (0..2)
                .map(|j| SubsetChainConfig::new(j, Proposal::NearestNeighbor, config.m, part_seed(seed, j)).with_start(vec![mode]))
                .collect();
            let run = sample_parts(poisson, cover, &configs)?;
            let merged = merge_samples(&run.outputs, cover, config.merge, derive_seed(seed, stream::MERGE_KEEP), None)?;
            let v = merged.sample.first_coordinate();
            Ok((poisson_tv(&v, poisson)?, v.len(), run.seconds, merged.seconds))
        }
        Method::Standard => {
            let full = LinkedCover::single(poisson.support());
            let n = config.n.unwrap_or(config.m);
            let cfg = SubsetChainConfig::new(0, Proposal::NearestNeighbor, n, part_seed(seed, 0)).with_start(vec![mode]);
            let run = sample_parts(poisson, &full, std::slice::from_ref(&cfg))?;
            Ok((poisson_tv(&run.outputs[0].draws, poisson)?, n, run.seconds, 0.0))
        }
        Method::Rosenthal => {
            let starts = vec![vec![mode], vec![mode]];
            let run = rosenthal(poisson, &Proposal::NearestNeighbor, &starts, config.m, config.m / 10, seed)?;
            let all: Vec<f64> = run.outputs.iter().flat_map(|s| s.draws.iter().copied()).collect();
            Ok((poisson_tv(&all, poisson)?, all.len(), run.seconds, 0.0))
        }
    }
}

/// Per-batch TV of the Poisson experiment, plus timing.
pub fn poisson_batches(config: &ExperimentConfig) -> Result<(Vec<f64>, Vec<usize>, Vec<f64>, f64)> {
    let poisson = Poisson::new(config.rate)?;
    let cover = poisson_cover(config.rate);
    let mut tvs = Vec::with_capacity(config.batches);
    let mut sizes = Vec::with_capacity(config.batches);
    let mut workers = vec![0.0; if config.method == Method::Standard { 1 } else { 2 }];
    let mut merge_s = 0.0;
    for b in 0..config.batches {
        let (tv, n, secs, ms) = poisson_batch(config, &poisson, &cover, derive_seed(config.seed, b as u64))?;
        tvs.push(tv);
        sizes.push(n);
        for (w, s) in workers.iter_mut().zip(secs) {
            *w += s;
        }
        merge_s += ms;
    }
    Ok((tvs, sizes, workers, merge_s))
}

fn run_poisson(config: &ExperimentConfig, sink: &Sink) -> Result<RunSummary> {
    sink.cover(&io::CoverFile::Continuous(poisson_cover(config.rate)))?;
    let (tvs, sizes, workers, merge_s) = poisson_batches(config)?;
    if let Some(p) = sink.path("tv.csv") {
        io::write_column(&p, "tv", &tvs)?;
    }
    let n = sizes.iter().sum::<usize>() / sizes.len();
    let mut s = summary(config, "tv", n, workers, merge_s, Some(mean(&tvs)));
    s.tv_se = Some((variance(&tvs) / tvs.len() as f64).sqrt());
    Ok(s)
}

fn gmm_target(config: &ExperimentConfig) -> Result<GaussianMixture> {
    match config.dims {
        2 => Ok(GaussianMixture::two_dim_example()),
        5 => Ok(GaussianMixture::five_dim_example()),
        d => Err(Error::Config(format!("gmm examples exist in 2 and 5 dims, not {d}"))),
    }
}

fn ks_gmm(values: &[f64], gmm: &GaussianMixture) -> Result<f64> {
    Ok(ks_distance(values, |x| gmm.marginal_cdf(0, x))?)
}

fn run_gmm(config: &ExperimentConfig, sink: &Sink) -> Result<RunSummary> {
    let gmm = gmm_target(config)?;
    let scale = vec![1.0; gmm.dim()];
    match config.method {
        Method::Dc => {
            let mut settings = CoverEstimation::new(config.pilot.unwrap_or(2000), config.parts);
            settings.delta = config.delta;
            let cover = estimate_cover(&gmm, &settings, derive_seed(config.seed, stream::PILOT))?;
            sink.cover(&io::CoverFile::Continuous(cover.clone()))?;
            let configs: Vec<SubsetChainConfig> = (0..cover.len())
                .map(|j| {
                    let s = default_scale(cover.part(j), &scale);
                    SubsetChainConfig::new(j, Proposal::RandomWalk { scale: s }, config.m, part_seed(config.seed, j))
                        .with_burn_in(config.m / 10)
                })
                .collect();
            let run = sample_parts(&gmm, &cover, &configs)?;
            sink.samples(&run.outputs)?;
            let merged = merge_samples(&run.outputs, &cover, config.merge, derive_seed(config.seed, stream::MERGE_KEEP), None)?;
            sink.merged(&merged)?;
            let ks = ks_gmm(&merged.sample.first_coordinate(), &gmm)?;
            Ok(summary(config, "ks", merged.sample.len(), run.seconds, merged.seconds, Some(ks)))
        }
        Method::Standard => {
            let full = LinkedCover::single(gmm.support());
            let n = config.standard_draws();
            let cfg = SubsetChainConfig::new(0, Proposal::RandomWalk { scale }, n, part_seed(config.seed, 0)).with_burn_in(n / 10);
            let run = sample_parts(&gmm, &full, std::slice::from_ref(&cfg))?;
            let first: Vec<f64> = run.outputs[0].rows().map(|r| r[0]).collect();
            Ok(summary(config, "ks", n, run.seconds, 0.0, Some(ks_gmm(&first, &gmm)?)))
        }
        Method::Rosenthal => {
            let mut settings = CoverEstimation::new(config.pilot.unwrap_or(2000), config.parts);
            settings.delta = config.delta;
            let cover = estimate_cover(&gmm, &settings, derive_seed(config.seed, stream::PILOT))?;
            let starts: Vec<Vec<f64>> = cover.parts().iter().map(|p| p.anchor(&scale)).collect();
            let run = rosenthal(&gmm, &Proposal::RandomWalk { scale }, &starts, config.m, config.m / 10, config.seed)?;
            let first: Vec<f64> = run.outputs.iter().flat_map(|s| s.rows().map(|r| r[0])).collect();
            let n = first.len();
            Ok(summary(config, "ks", n, run.seconds, 0.0, Some(ks_gmm(&first, &gmm)?)))
        }
    }
}

/// Parameters used to simulate the return series.
pub fn sv_truth() -> SVParams {
    SVParams::new(0.6, 0.7, -0.3, 0.5).expect("valid parameters")
}

/// Simulated returns (or the configured CSV).
pub fn sv_data(config: &ExperimentConfig) -> Result<ReturnSeries> {
    match &config.returns {
        Some(path) => io::read_returns(path),
        None => Ok(simulate_sv(&sv_truth(), config.t, derive_seed(config.seed, DATA_STREAM))?.1),
    }
}

/// Proposal covariance from a full-space pilot run of `steps` iterations.
pub fn sv_proposal(data: &ReturnSeries, steps: usize, particles: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut pilot = PmmhConfig::new(steps, derive_seed(seed, stream::PILOT));
    pilot.particles = particles;
    let chain = pmmh_chain(data, &pilot)?;
    Ok(pilot_covariance(&chain.states[steps / 5..]))
}

/// One PMMH chain per part of the split cover.
pub fn sv_parts(data: &ReturnSeries, cov: &[Vec<f64>], config: &ExperimentConfig) -> Result<Timed<PmmhChain>> {
    let cover = sv_cover();
    run_workers(cover.len(), |j| {
        let mut c = PmmhConfig::new(config.m, part_seed(config.seed, j));
        c.particles = config.particles;
        c.proposal_cov = cov.to_vec();
        c.restriction = cover.part(j).clone();
        Ok(pmmh_chain(data, &c)?)
    })
}

/// Wraps a PMMH chain as a subset sample of the split cover.
pub fn chain_as_sample(chain: &PmmhChain, part: usize, seed: u64) -> Result<SubsetSample> {
    let draws = chain.states.iter().flat_map(|s| s.to_array()).collect();
    Ok(SubsetSample::from_draws(&sv_cover(), part, draws, chain.acceptance_rate(), seed)?)
}

fn run_sv(config: &ExperimentConfig, sink: &Sink) -> Result<RunSummary> {
    let data = sv_data(config)?;
    if let Some(p) = sink.path("returns.csv") {
        io::write_returns(&p, &data)?;
    }
    let cov = match config.pilot {
        Some(steps) if steps > 0 => sv_proposal(&data, steps, config.particles, config.seed)?,
        _ => dcs_core::pmmh::fallback_covariance(),
    };
    match config.method {
        Method::Dc => {
            let cover = sv_cover();
            sink.cover(&io::CoverFile::Continuous(cover.clone()))?;
            let run = sv_parts(&data, &cov, config)?;
            let mut samples = Vec::with_capacity(run.outputs.len());
            for (j, chain) in run.outputs.iter().enumerate() {
                if let Some(p) = sink.path(&format!("chain_{j}.csv")) {
                    io::write_chain(&p, chain)?;
                }
                samples.push(chain_as_sample(chain, j, part_seed(config.seed, j))?);
            }
            let merged = merge_samples(&samples, &cover, config.merge, derive_seed(config.seed, stream::MERGE_KEEP), None)?;
            sink.merged(&merged)?;
            Ok(summary(config, "none", merged.sample.len(), run.seconds, merged.seconds, None))
        }
        Method::Standard | Method::Rosenthal => {
            let n = config.standard_draws();
            let (chain, secs) = timed(|| -> Result<PmmhChain> {
                let mut c = PmmhConfig::new(n, part_seed(config.seed, 0));
                c.particles = config.particles;
                c.proposal_cov = cov.clone();
                Ok(pmmh_chain(&data, &c)?)
            });
            let chain = chain?;
            if let Some(p) = sink.path("chain.csv") {
                io::write_chain(&p, &chain)?;
            }
            Ok(summary(config, "none", n, vec![secs], 0.0, None))
        }
    }
}

/// Writes `method,N,runtime_s,tv,tv_times_n`, grouped by experiment and,
/// for the seven-state chain, hard case above the nice case; within a group
/// standard, Rosenthal and decomposition runs follow in that order.
pub fn emit_summary(rows: &[RunSummary], path: &Path) -> Result<()> {
    let mut order: Vec<&RunSummary> = rows.iter().collect();
    order.sort_by(|x, y| {
        (x.experiment as u8)
            .cmp(&(y.experiment as u8))
            .then(x.a.unwrap_or(0.0).total_cmp(&y.a.unwrap_or(0.0)))
            .then(x.method.rank().cmp(&y.method.rank()))
    });
    let mut text = String::from("method,N,runtime_s,tv,tv_times_n\n");
    let fmt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.6e}"));
    for r in order {
        text.push_str(&format!(
            "{},{},{:.6},{},{}\n",
            r.method.label(),
            r.n,
            r.runtime_s,
            fmt(r.tv),
            fmt(r.tv_times_n())
        ));
    }
    io::write_text(path, &text)
}

/// Default output directory: the environment variable, else `./dcs-out`.
pub fn default_output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("dcs-out"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_overlays_defaults() {
        let c = ExperimentConfig::from_json(Experiment::Gamma, r#"{"M": 500, "seed": 9}"#).unwrap();
        assert_eq!(c.m, 500);
        assert_eq!(c.seed, 9);
        assert_eq!(c.parts, 3);
        assert_eq!(c.shape, 4.0);
        assert!(ExperimentConfig::from_json(Experiment::Gamma, r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = ExperimentConfig::for_experiment(Experiment::Discrete);
        c.m = 0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::for_experiment(Experiment::Gamma);
        c.pilot = Some(100);
        c.delta = Some(0.0);
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::for_experiment(Experiment::Discrete);
        c.parts = 3;
        assert!(c.validate().is_err());
    }

    #[test]
    fn part_modes_pick_heaviest_state() {
        let lambda = DiscreteChain::seven_state(0.03).unwrap().stationary_law().to_vec();
        assert_eq!(part_modes(&lambda, &seven_state_cover()), vec![2, 6]);
    }

    #[test]
    fn summary_rows_follow_table_grouping() {
        let row = |method, a| RunSummary {
            experiment: Experiment::Discrete,
            method,
            a: Some(a),
            n: 10,
            runtime_s: 0.0,
            worker_s: vec![],
            merge_s: 0.0,
            metric: "tv".into(),
            tv: Some(0.5),
            tv_se: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        emit_summary(&[row(Method::Dc, 0.03), row(Method::Dc, 0.003), row(Method::Standard, 0.003)], &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let methods: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(methods, ["MH-Standard", "MH-DC", "MH-DC"]);
        assert!(text.lines().nth(1).unwrap().ends_with("5.000000e0"));
        emit_summary(&[], &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "method,N,runtime_s,tv,tv_times_n\n");
    }
}
