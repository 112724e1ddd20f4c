//! File formats: covers and reports as JSON, draws and chains as CSV.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use dcs_core::cover::{Cover, DiscreteCover, LinkedCover, Region};
use dcs_core::expectation::ExpectationEstimate;
use dcs_core::merge::MergedSample;
use dcs_core::pmmh::{PmmhChain, ReturnSeries, PARAM_NAMES};
use dcs_core::proportion::ProportionEstimate;
use dcs_core::samplers::SubsetSample;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

/// One side of a box: a number, or `"inf"` / `"-inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Bound {
    Finite(f64),
    Text(String),
}

impl Bound {
    fn from_f64(v: f64) -> Self {
        if v == f64::INFINITY {
            Bound::Text("inf".into())
        } else if v == f64::NEG_INFINITY {
            Bound::Text("-inf".into())
        } else {
            Bound::Finite(v)
        }
    }

    fn to_f64(&self) -> Result<f64> {
        match self {
            Bound::Finite(v) => Ok(*v),
            Bound::Text(s) => match s.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(Error::Format(format!("bad bound {other:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BoxDoc {
    lo: Vec<Bound>,
    hi: Vec<Bound>,
}

impl BoxDoc {
    fn from_region(r: &Region) -> Self {
        Self {
            lo: r.lo().iter().map(|&v| Bound::from_f64(v)).collect(),
            hi: r.hi().iter().map(|&v| Bound::from_f64(v)).collect(),
        }
    }

    fn to_region(&self) -> Result<Region> {
        let lo = self.lo.iter().map(Bound::to_f64).collect::<Result<Vec<_>>>()?;
        let hi = self.hi.iter().map(Bound::to_f64).collect::<Result<Vec<_>>>()?;
        Ok(Region::new(lo, hi)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CoverDoc {
    dims: usize,
    support: BoxDoc,
    parts: Vec<BoxDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DiscreteCoverDoc {
    states: usize,
    parts: Vec<Vec<usize>>,
}

/// A cover read from disk.
#[derive(Debug, Clone, PartialEq)]
pub enum CoverFile {
    Continuous(LinkedCover),
    Discrete(DiscreteCover),
}

impl CoverFile {
    pub fn as_dyn(&self) -> &dyn Cover {
        match self {
            CoverFile::Continuous(c) => c,
            CoverFile::Discrete(c) => c,
        }
    }
}

pub fn cover_to_json(cover: &LinkedCover) -> Result<String> {
    let doc = CoverDoc {
        dims: cover.dim(),
        support: BoxDoc::from_region(cover.support()),
        parts: cover.parts().iter().map(BoxDoc::from_region).collect(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn discrete_cover_to_json(cover: &DiscreteCover) -> Result<String> {
    let doc = DiscreteCoverDoc { states: cover.states(), parts: cover.parts().to_vec() };
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Parses either cover document; discrete covers are recognized by `"states"`.
pub fn cover_from_json(text: &str) -> Result<CoverFile> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.get("states").is_some() {
        let doc: DiscreteCoverDoc = serde_json::from_value(value)?;
        return Ok(CoverFile::Discrete(DiscreteCover::linked(doc.states, doc.parts)?));
    }
    let doc: CoverDoc = serde_json::from_value(value)?;
    let support = doc.support.to_region()?;
    if support.dim() != doc.dims {
        return Err(Error::Format(format!("support has {} dims, header says {}", support.dim(), doc.dims)));
    }
    let parts = doc.parts.iter().map(BoxDoc::to_region).collect::<Result<Vec<_>>>()?;
    Ok(CoverFile::Continuous(LinkedCover::linked(support, parts)?))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_cover(path: &Path) -> Result<CoverFile> {
    cover_from_json(&read_text(path)?)
}

pub fn write_cover(path: &Path, cover: &CoverFile) -> Result<()> {
    let text = match cover {
        CoverFile::Continuous(c) => cover_to_json(c)?,
        CoverFile::Discrete(c) => discrete_cover_to_json(c)?,
    };
    write_text(path, &(text + "\n"))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let file = File::create(path).map_err(io_err(path))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn coordinate_header(dim: usize) -> Vec<String> {
    (0..dim).map(|d| format!("x{d}")).collect()
}

/// Sidecar metadata of a subset sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub part: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub dim: usize,
    pub seed: u64,
    pub acceptance_rate: f64,
    pub hits_prev: usize,
    pub hits_next: usize,
}

/// Path of the JSON sidecar belonging to a CSV file.
pub fn sidecar(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes draws to `path` (one row per draw) and metadata to the sidecar.
pub fn write_sample(path: &Path, sample: &SubsetSample) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(coordinate_header(sample.dim))?;
    for row in sample.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(io_err(path))?;
    let meta = SampleMeta {
        part: sample.part,
        m: sample.len(),
        dim: sample.dim,
        seed: sample.seed,
        acceptance_rate: sample.acceptance_rate,
        hits_prev: sample.hits_prev,
        hits_next: sample.hits_next,
    };
    write_json(&sidecar(path), &meta)
}

fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut r = csv::Reader::from_reader(file);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|_| Error::Format(format!("{}: bad number {f:?}", path.display()))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Reads a subset sample back; overlap flags are recomputed from `cover`.
pub fn read_sample(path: &Path, cover: &dyn Cover) -> Result<SubsetSample> {
    let meta: SampleMeta = serde_json::from_str(&read_text(&sidecar(path))?)?;
    let (header, rows) = read_rows(path)?;
    if header.len() != meta.dim {
        return Err(Error::Format(format!("{}: {} columns, sidecar says dim {}", path.display(), header.len(), meta.dim)));
    }
    let draws = rows.into_iter().flatten().collect();
    let sample = SubsetSample::from_draws(cover, meta.part, draws, meta.acceptance_rate, meta.seed)?;
    if (sample.hits_prev, sample.hits_next) != (meta.hits_prev, meta.hits_next) {
        return Err(Error::Format(format!("{}: overlap hit counts disagree with the cover", path.display())));
    }
    Ok(sample)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ProportionDoc {
    pi: Vec<f64>,
    exclusive: Vec<f64>,
    hits: Vec<[usize; 2]>,
    #[serde(rename = "M")]
    m: Vec<usize>,
    prior_fraction: Vec<f64>,
}

pub fn write_proportions(path: &Path, p: &ProportionEstimate) -> Result<()> {
    let doc = ProportionDoc {
        pi: p.pi.clone(),
        exclusive: p.exclusive.clone(),
        hits: p.hits.clone(),
        m: p.lengths.clone(),
        prior_fraction: p.prior_fraction.clone(),
    };
    write_json(path, &doc)
}

pub fn read_proportions(path: &Path) -> Result<ProportionEstimate> {
    let doc: ProportionDoc = serde_json::from_str(&read_text(path)?)?;
    Ok(ProportionEstimate {
        pi: doc.pi,
        exclusive: doc.exclusive,
        hits: doc.hits,
        lengths: doc.m,
        prior_fraction: doc.prior_fraction,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedMeta {
    #[serde(rename = "N")]
    pub n: usize,
    pub dim: usize,
    pub kept: Vec<usize>,
    pub seed: u64,
}

/// Draw columns plus a `source` column, with a JSON sidecar.
pub fn write_merged(path: &Path, merged: &MergedSample) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = coordinate_header(merged.dim);
    header.push("source".into());
    w.write_record(&header)?;
    for (row, src) in merged.rows().zip(&merged.source) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(src.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(io_err(path))?;
    let meta = MergedMeta { n: merged.len(), dim: merged.dim, kept: merged.kept.clone(), seed: merged.seed };
    write_json(&sidecar(path), &meta)
}

pub fn read_merged(path: &Path) -> Result<MergedSample> {
    let meta: MergedMeta = serde_json::from_str(&read_text(&sidecar(path))?)?;
    let (header, rows) = read_rows(path)?;
    if header.len() != meta.dim + 1 {
        return Err(Error::Format(format!("{}: expected {} columns", path.display(), meta.dim + 1)));
    }
    let mut draws = Vec::with_capacity(rows.len() * meta.dim);
    let mut source = Vec::with_capacity(rows.len());
    for row in rows {
        draws.extend_from_slice(&row[..meta.dim]);
        source.push(row[meta.dim] as usize);
    }
    Ok(MergedSample { dim: meta.dim, draws, source, kept: meta.kept, seed: meta.seed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartDoc {
    pub mean: f64,
    pub stderr: f64,
    pub weight: f64,
    pub eligible: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationDoc {
    pub h: String,
    pub estimate: f64,
    pub stderr: f64,
    pub per_part: Vec<PartDoc>,
    pub weights_uncertainty_ignored: bool,
}

impl From<&ExpectationEstimate> for ExpectationDoc {
    fn from(e: &ExpectationEstimate) -> Self {
        Self {
            h: e.name.clone(),
            estimate: e.estimate,
            stderr: e.stderr,
            per_part: e
                .per_part
                .iter()
                .map(|p| PartDoc { mean: p.mean, stderr: p.stderr, weight: p.weight, eligible: p.eligible })
                .collect(),
            weights_uncertainty_ignored: e.weights_uncertainty_ignored,
        }
    }
}

/// One `log_return` column; the header line is optional.
pub fn read_returns(path: &Path) -> Result<ReturnSeries> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(file);
    let mut values = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = rec.get(0).unwrap_or("").trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => return Err(Error::Format(format!("{}: line {}: bad return {field:?}", path.display(), i + 1))),
        }
    }
    Ok(ReturnSeries::new(values)?)
}

pub fn write_returns(path: &Path, series: &ReturnSeries) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["log_return"])?;
    for v in series.values() {
        w.write_record([v.to_string()])?;
    }
    w.flush().map_err(io_err(path))
}

/// Columns `phi,beta,rho,sigma,loglik,accepted`.
pub fn write_chain(path: &Path, chain: &PmmhChain) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<&str> = PARAM_NAMES.to_vec();
    header.extend(["loglik", "accepted"]);
    w.write_record(&header)?;
    for ((s, ll), acc) in chain.states.iter().zip(&chain.loglik).zip(&chain.accepted) {
        let mut rec: Vec<String> = s.to_array().iter().map(|v| v.to_string()).collect();
        rec.push(ll.to_string());
        rec.push((*acc as u8).to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes one value per line under a single-column header.
pub fn write_column(path: &Path, name: &str, values: &[f64]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([name])?;
    for v in values {
        w.write_record([v.to_string()])?;
    }
    w.flush().map_err(io_err(path))
}
