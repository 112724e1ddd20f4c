//! Command-line interface.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use dcs_core::cover::{estimate_cover, Cover, CoverEstimation, DiscreteCover};
use dcs_core::expectation::{estimate_expectation_with, EstimatorForm, Integrand};
use dcs_core::merge::{merge, merge_weighted, merge_with_reuse};
use dcs_core::proportion::estimate_proportions;
use dcs_core::rng::{derive_seed, stream};
use dcs_core::samplers::{default_scale, gamma_envelope, subset_mh, subset_rejection, Proposal, SubsetChainConfig};
use dcs_core::target::{builtin_targets, DiscreteChain, Gamma, GaussianMixture, Poisson, Target};

use crate::error::{Error, Result};
use crate::experiment::{
    default_output_dir, emit_summary, gamma_fixed_cover, poisson_cover, run_experiment, Experiment, ExperimentConfig,
    MergeVariant, Method, RunSummary, SamplerKind, OUTPUT_DIR_ENV,
};
use crate::io::{self, CoverFile, ExpectationDoc};

#[derive(Debug, Parser)]
#[command(name = "dcs", version, about = "Decomposition sampling over overlapping linked covers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a cover (estimated from a pilot run, or a fixed one) and write it as JSON.
    Cover(CoverArgs),
    /// Draw from one part of a cover.
    Sample(SampleArgs),
    /// Estimate proportions and merge per-part samples.
    Merge(MergeArgs),
    /// Estimate an expectation from per-part samples.
    Expect(ExpectArgs),
    /// Run a benchmark experiment.
    Bench(BenchArgs),
    /// Collect run summaries into one table.
    Report(ReportArgs),
    /// List the built-in targets.
    Targets,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetName {
    Gamma,
    Poisson,
    Discrete,
    Gmm,
}

#[derive(Debug, Clone, Args)]
pub struct TargetArgs {
    #[arg(long, value_enum, default_value = "gamma")]
    pub target: TargetName,
    #[arg(long, default_value_t = 4.0)]
    pub shape: f64,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value_t = Poisson::DEFAULT_RATE)]
    pub rate: f64,
    /// Bottleneck probability of the seven-state chain.
    #[arg(long, default_value_t = DiscreteChain::HARD_A)]
    pub a: f64,
    /// Mixture dimension (2 or 5).
    #[arg(long, default_value_t = 2)]
    pub dims: usize,
}

impl TargetArgs {
    fn build(&self) -> Result<Box<dyn Target>> {
        Ok(match self.target {
            TargetName::Gamma => Box::new(Gamma::new(self.shape, self.scale)?),
            TargetName::Poisson => Box::new(Poisson::new(self.rate)?),
            TargetName::Discrete => Box::new(DiscreteChain::seven_state(self.a)?),
            TargetName::Gmm => Box::new(match self.dims {
                2 => GaussianMixture::two_dim_example(),
                5 => GaussianMixture::five_dim_example(),
                d => return Err(Error::Config(format!("gmm examples exist in 2 and 5 dims, not {d}"))),
            }),
        })
    }
}

#[derive(Debug, Args)]
pub struct CoverArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    /// Number of parts W.
    #[arg(long, default_value_t = 3)]
    pub parts: usize,
    /// Pilot draws.
    #[arg(long, default_value_t = 100)]
    pub pilot: usize,
    /// Overlap mass; defaults to 0.1 / W.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Use the target's fixed cover instead of estimating one.
    #[arg(long)]
    pub fixed: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerArg {
    Mh,
    Rejection,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long)]
    pub cover: PathBuf,
    #[arg(long)]
    pub part: usize,
    /// Retained draws M.
    #[arg(short = 'M', long = "draws", default_value_t = 10_000)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub burn_in: usize,
    #[arg(long, value_enum, default_value = "mh")]
    pub sampler: SamplerArg,
    /// Random-walk standard deviation (all dimensions).
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Downsample,
    Weighted,
    Reuse,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    #[arg(long)]
    pub cover: PathBuf,
    /// Per-part sample CSVs, in part order.
    #[arg(required = true)]
    pub samples: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "downsample")]
    pub variant: VariantArg,
    /// Output size of the weighted and reuse variants; defaults to M.
    #[arg(short = 'N', long = "size")]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormArg {
    Conditional,
    Literal,
}

#[derive(Debug, Args)]
pub struct ExpectArgs {
    #[arg(long)]
    pub cover: PathBuf,
    #[arg(required = true)]
    pub samples: Vec<PathBuf>,
    /// Integrand: `1`, `x0`, `x0^2` or `1{x=3}`.
    #[arg(long, default_value = "x0")]
    pub h: String,
    #[arg(long, value_enum, default_value = "conditional")]
    pub form: FormArg,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentArg {
    Discrete,
    Poisson,
    Gamma,
    Sv,
    Gmm,
}

impl From<ExperimentArg> for Experiment {
    fn from(e: ExperimentArg) -> Self {
        match e {
            ExperimentArg::Discrete => Experiment::Discrete,
            ExperimentArg::Poisson => Experiment::Poisson,
            ExperimentArg::Gamma => Experiment::Gamma,
            ExperimentArg::Sv => Experiment::Sv,
            ExperimentArg::Gmm => Experiment::Gmm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Dc,
    Standard,
    Rosenthal,
}

/// Command-line flags override the configuration file.
#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(value_enum)]
    pub experiment: ExperimentArg,
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(short = 'W', long)]
    pub parts: Option<usize>,
    #[arg(short = 'M', long = "draws")]
    pub m: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub pilot: Option<usize>,
    #[arg(short = 'N', long = "total")]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub batches: Option<usize>,
    #[arg(long, value_enum)]
    pub sampler: Option<SamplerArg>,
    #[arg(long, value_enum)]
    pub merge: Option<VariantArg>,
    #[arg(long)]
    pub shape: Option<f64>,
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub dims: Option<usize>,
    #[arg(short = 'T', long)]
    pub t: Option<usize>,
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long)]
    pub returns: Option<PathBuf>,
    /// Output directory; defaults to the DCS_OUTPUT_DIR environment variable.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directories containing `summary.json`.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn variant(v: VariantArg) -> MergeVariant {
    match v {
        VariantArg::Downsample => MergeVariant::Downsample,
        VariantArg::Weighted => MergeVariant::Weighted,
        VariantArg::Reuse => MergeVariant::Reuse,
    }
}

fn sampler(s: SamplerArg) -> SamplerKind {
    match s {
        SamplerArg::Mh => SamplerKind::Mh,
        SamplerArg::Rejection => SamplerKind::Rejection,
    }
}

/// Resolves a bench configuration: defaults, then the file, then the flags.
pub fn bench_config(args: &BenchArgs) -> Result<ExperimentConfig> {
    let tag = Experiment::from(args.experiment);
    let mut c = match &args.config {
        Some(p) => ExperimentConfig::from_json(tag, &io::read_text(p)?)?,
        None => ExperimentConfig::for_experiment(tag),
    };
    if c.experiment != tag {
        return Err(Error::Config(format!("configuration is for {}, not {}", c.experiment.name(), tag.name())));
    }
    if let Some(m) = args.method {
        c.method = match m {
            MethodArg::Dc => Method::Dc,
            MethodArg::Standard => Method::Standard,
            MethodArg::Rosenthal => Method::Rosenthal,
        };
    }
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = args.$field.clone() { c.$field = v; } )* };
    }
    set!(parts, m, seed, batches, shape, scale, rate, a, dims, t, particles);
    if args.delta.is_some() {
        c.delta = args.delta;
    }
    if args.pilot.is_some() {
        c.pilot = args.pilot;
    }
    if args.n.is_some() {
        c.n = args.n;
    }
    if args.returns.is_some() {
        c.returns = args.returns.clone();
    }
    if let Some(s) = args.sampler {
        c.sampler = sampler(s);
    }
    if let Some(v) = args.merge {
        c.merge = variant(v);
    }
    c.output = Some(match (&args.out, &c.output) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => o.clone(),
        (None, None) => default_output_dir().join(format!("{}-{:?}", tag.name(), c.method).to_lowercase()),
    });
    Ok(c)
}

/// Parses `1`, a constant, `xD`, `xD^P` or `1{x=S}`.
pub fn parse_integrand(text: &str) -> Result<Integrand> {
    let t = text.trim();
    let bad = || Error::Config(format!("cannot parse integrand {text:?}"));
    if let Some(inner) = t.strip_prefix("1{x=").and_then(|r| r.strip_suffix('}')) {
        return Ok(Integrand::indicator(inner.trim().parse().map_err(|_| bad())?));
    }
    if let Some(rest) = t.strip_prefix('x') {
        let (d, p) = match rest.split_once('^') {
            Some((d, p)) => (d, p.parse::<i32>().map_err(|_| bad())?),
            None => (rest, 1),
        };
        let d: usize = if d.is_empty() { 0 } else { d.parse().map_err(|_| bad())? };
        return Ok(if p == 1 { Integrand::coordinate(d) } else { Integrand::power(d, p) });
    }
    t.parse::<f64>().map(Integrand::constant).map_err(|_| bad())
}

fn out_path(given: &Option<PathBuf>, default: &str) -> PathBuf {
    given.clone().unwrap_or_else(|| default_output_dir().join(default))
}

fn cmd_cover(args: &CoverArgs) -> Result<PathBuf> {
    let cover = match (args.target.target, args.fixed) {
        (TargetName::Discrete, _) => {
            CoverFile::Discrete(DiscreteCover::linked(7, vec![vec![0, 1, 2, 3], vec![3, 4, 5, 6]])?)
        }
        (TargetName::Gamma, true) => CoverFile::Continuous(gamma_fixed_cover()),
        (TargetName::Poisson, true) => CoverFile::Continuous(poisson_cover(args.target.rate)),
        (TargetName::Gmm, true) => return Err(Error::Config("gmm has no fixed cover".into())),
        (_, false) => {
            let target = args.target.build()?;
            let mut settings = CoverEstimation::new(args.pilot, args.parts);
            settings.delta = args.delta;
            CoverFile::Continuous(estimate_cover(target.as_ref(), &settings, derive_seed(args.seed, stream::PILOT))?)
        }
    };
    let path = out_path(&args.output, "cover.json");
    io::write_cover(&path, &cover)?;
    Ok(path)
}

fn cmd_sample(args: &SampleArgs) -> Result<PathBuf> {
    let target = args.target.build()?;
    let cover = io::read_cover(&args.cover)?;
    let c = cover.as_dyn();
    if args.part >= c.len() {
        return Err(dcs_core::Error::PartOutOfRange { index: args.part, parts: c.len() }.into());
    }
    let sample = match (args.sampler, args.target.target, &cover) {
        (SamplerArg::Rejection, TargetName::Gamma, CoverFile::Continuous(lc)) => {
            let g = Gamma::new(args.target.shape, args.target.scale)?;
            let env = gamma_envelope(&g, lc.part(args.part))?;
            subset_rejection(&g, env.as_ref(), lc, args.part, args.m, args.seed)?
        }
        (SamplerArg::Rejection, _, _) => {
            return Err(Error::Config("rejection sampling is available for the gamma target".into()))
        }
        (SamplerArg::Mh, name, _) => {
            let proposal = match name {
                TargetName::Discrete => Proposal::Kernel(DiscreteChain::seven_state(args.target.a)?.kernel().clone()),
                TargetName::Poisson => Proposal::NearestNeighbor,
                _ => {
                    let dim = target.dim();
                    let scale = match args.step {
                        Some(s) => vec![s; dim],
                        None => default_scale(&c.part_box(args.part), &vec![1.0; dim]),
                    };
                    Proposal::RandomWalk { scale }
                }
            };
            let config = SubsetChainConfig::new(args.part, proposal, args.m, args.seed).with_burn_in(args.burn_in);
            subset_mh(target.as_ref(), c, &config)?
        }
    };
    let path = out_path(&args.output, &format!("sample_{}.csv", args.part));
    io::write_sample(&path, &sample)?;
    Ok(path)
}

fn read_samples(cover: &dyn Cover, paths: &[PathBuf]) -> Result<Vec<dcs_core::samplers::SubsetSample>> {
    let samples = paths.iter().map(|p| io::read_sample(p, cover)).collect::<Result<Vec<_>>>()?;
    for (j, s) in samples.iter().enumerate() {
        if s.part != j {
            return Err(Error::Format(format!("sample {} holds part {}, expected part {j}", paths[j].display(), s.part)));
        }
    }
    Ok(samples)
}

fn cmd_merge(args: &MergeArgs) -> Result<PathBuf> {
    let cover = io::read_cover(&args.cover)?;
    let c = cover.as_dyn();
    let samples = read_samples(c, &args.samples)?;
    let props = estimate_proportions(&samples, c)?;
    let n = args.n.unwrap_or_else(|| samples[0].len());
    let merged = match args.variant {
        VariantArg::Downsample => merge(&samples, &props, args.seed)?,
        VariantArg::Weighted => merge_weighted(&samples, &props, n, args.seed)?,
        VariantArg::Reuse => merge_with_reuse(&samples, &props, c, n, args.seed)?,
    };
    let path = out_path(&args.output, "merged.csv");
    io::write_merged(&path, &merged)?;
    io::write_proportions(&path.with_file_name("proportions.json"), &props)?;
    Ok(path)
}

fn cmd_expect(args: &ExpectArgs) -> Result<(PathBuf, ExpectationDoc)> {
    let cover = io::read_cover(&args.cover)?;
    let c = cover.as_dyn();
    let samples = read_samples(c, &args.samples)?;
    let props = estimate_proportions(&samples, c)?;
    let h = parse_integrand(&args.h)?;
    let form = match args.form {
        FormArg::Conditional => EstimatorForm::Conditional,
        FormArg::Literal => EstimatorForm::Literal,
    };
    let doc = ExpectationDoc::from(&estimate_expectation_with(&h, &samples, &props, form)?);
    let path = out_path(&args.output, "expectation.json");
    io::write_json(&path, &doc)?;
    Ok((path, doc))
}

fn cmd_report(args: &ReportArgs) -> Result<PathBuf> {
    let rows = args
        .runs
        .iter()
        .map(|d| Ok(serde_json::from_str::<RunSummary>(&io::read_text(&d.join("summary.json"))?)?))
        .collect::<Result<Vec<_>>>()?;
    let path = out_path(&args.output, "summary.csv");
    emit_summary(&rows, &path)?;
    Ok(path)
}

fn show(path: &Path) {
    println!("wrote {}", path.display());
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Cover(a) => show(&cmd_cover(&a)?),
        Command::Sample(a) => show(&cmd_sample(&a)?),
        Command::Merge(a) => show(&cmd_merge(&a)?),
        Command::Expect(a) => {
            let (path, doc) = cmd_expect(&a)?;
            println!("{} = {:.6} ± {:.6}", doc.h, doc.estimate, doc.stderr);
            show(&path);
        }
        Command::Bench(a) => {
            let config = bench_config(&a)?;
            let s = run_experiment(&config)?;
            match s.tv {
                Some(v) => println!("{} {}: N = {}, {} = {v:.4e}, runtime {:.3}s", config.experiment.name(), s.method.label(), s.n, s.metric, s.runtime_s),
                None => println!("{} {}: N = {}, runtime {:.3}s", config.experiment.name(), s.method.label(), s.n, s.runtime_s),
            }
            show(config.output.as_deref().expect("resolved output"));
        }
        Command::Report(a) => show(&cmd_report(&a)?),
        Command::Targets => {
            for t in builtin_targets() {
                println!("{:<10} {}", t.name, t.summary);
            }
            println!("\noutput directory: ${OUTPUT_DIR_ENV} (default ./dcs-out)");
        }
    }
    Ok(())
}
