//! LIBSVM parsing, synthetic datasets and run-trace persistence.
//!
//! Traces are a CSV with header `epoch,eta,loss,grad_norm_sq` plus a JSON
//! sidecar (`<trace>.json`). Floats are written with Rust's shortest
//! round-trip rendering, so rereading reproduces every value bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audit::BoundReport;
use crate::error::{Error, Result};
use crate::optimizers::{EpochRow, RunRecord};
use crate::problems::SparseSample;

/// Header row of every trace CSV.
pub const TRACE_HEADER: [&str; 4] = ["epoch", "eta", "loss", "grad_norm_sq"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub source: String,
    pub checksum: Option<String>,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

/// Parses LIBSVM text: `label idx:val idx:val ...` per line, 1-based strictly
/// increasing indices. Labels `0`/`-1` map to −1 and `1`/`+1` to +1. Blank lines
/// and `#` comments are skipped. Returns the samples and the largest index seen.
pub fn parse_libsvm<R: Read>(reader: R) -> Result<(Vec<SparseSample>, usize)> {
    let mut samples = Vec::new();
    let mut dim = 0;
    for (k, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = k + 1;
        let line = line.map_err(|e| parse_err(lineno, e.to_string()))?;
        let content = line.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace();
        let Some(label_tok) = tokens.next() else { continue };
        let label = parse_label(label_tok).ok_or_else(|| parse_err(lineno, format!("bad label {label_tok:?}")))?;
        let mut features = Vec::new();
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| parse_err(lineno, format!("bad token {tok:?}")))?;
            let idx: usize = idx.parse().map_err(|_| parse_err(lineno, format!("bad index in {tok:?}")))?;
            let val: f64 = val.parse().map_err(|_| parse_err(lineno, format!("bad value in {tok:?}")))?;
            if !val.is_finite() {
                return Err(parse_err(lineno, format!("non-finite value in {tok:?}")));
            }
            features.push((idx, val));
        }
        let sample = SparseSample::new(label, features).map_err(|e| parse_err(lineno, e.to_string()))?;
        dim = dim.max(sample.max_index());
        samples.push(sample);
    }
    Ok((samples, dim))
}

fn parse_label(tok: &str) -> Option<i8> {
    let v: f64 = tok.parse().ok()?;
    if v == 1.0 {
        Some(1)
    } else if v == -1.0 || v == 0.0 {
        Some(-1)
    } else {
        None
    }
}

/// Reads and parses a LIBSVM file, returning its metadata with a sha256 checksum.
pub fn load_libsvm(path: &Path) -> Result<(Vec<SparseSample>, DatasetMeta)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (samples, d) = parse_libsvm(bytes.as_slice())?;
    let meta = DatasetMeta {
        name: path.file_name().map_or_else(String::new, |s| s.to_string_lossy().into_owned()),
        n: samples.len(),
        d,
        source: path.display().to_string(),
        checksum: Some(hex::encode(Sha256::digest(&bytes))),
    };
    Ok((samples, meta))
}

/// Divides every feature by the largest absolute value seen for that index.
pub fn scale_features(samples: &[SparseSample], dim: usize) -> Result<Vec<SparseSample>> {
    let mut peak = vec![0.0_f64; dim + 1];
    for s in samples {
        for &(j, v) in s.features() {
            peak[j] = peak[j].max(v.abs());
        }
    }
    samples
        .iter()
        .map(|s| {
            let f = s.features().iter().map(|&(j, v)| (j, if peak[j] > 0.0 { v / peak[j] } else { v })).collect();
            SparseSample::new(s.label_sign(), f)
        })
        .collect()
}

/// Gaussian features with labels from a planted unit normal. Each label is
/// flipped with probability `(1 − separability)/2`; `separability = 1` keeps all.
pub fn synth_binary_dataset(n: usize, d: usize, seed: u64, separability: f64) -> Result<Vec<SparseSample>> {
    if n == 0 || d == 0 {
        return Err(Error::invalid("synthetic dataset needs n, d >= 1"));
    }
    if !(0.0..=1.0).contains(&separability) {
        return Err(Error::invalid(format!("separability must lie in [0, 1], got {separability}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = planted_normal(d, seed);
    let flip = (1.0 - separability) / 2.0;
    (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let margin: f64 = x.iter().zip(&normal).map(|(a, b)| a * b).sum();
            let mut label: i8 = if margin >= 0.0 { 1 } else { -1 };
            let u: f64 = rng.random();
            if u < flip {
                label = -label;
            }
            SparseSample::new(label, x.into_iter().enumerate().map(|(j, v)| (j + 1, v)).collect())
        })
        .collect()
}

/// Unit normal of the hyperplane behind [`synth_binary_dataset`].
pub fn planted_normal(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

/// JSON sidecar stored next to every trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSidecar {
    pub config_hash: Option<String>,
    pub seed: u64,
    pub algorithm: String,
    pub selected_index: usize,
    pub final_loss: f64,
    pub weighted_grad_norm_sq: f64,
    pub config: Option<serde_json::Value>,
    pub bound_report: Option<BoundReport>,
}

/// `trace.csv` → `trace.csv.json`
pub fn sidecar_path(trace: &Path) -> PathBuf {
    let mut s = trace.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the per-epoch CSV and its sidecar.
pub fn write_trace(
    record: &RunRecord,
    path: &Path,
    config: Option<serde_json::Value>,
    bound_report: Option<&BoundReport>,
) -> Result<()> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(TRACE_HEADER).map_err(csv_err)?;
    for r in &record.rows {
        w.write_record([r.epoch.to_string(), r.eta.to_string(), r.loss.to_string(), r.grad_norm_sq.to_string()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let sidecar = TraceSidecar {
        config_hash: record.config_hash.clone(),
        seed: record.seed,
        algorithm: record.algorithm.clone(),
        selected_index: record.selected_index,
        final_loss: record.final_loss,
        weighted_grad_norm_sq: record.weighted_grad_norm_sq(),
        config,
        bound_report: bound_report.cloned(),
    };
    write_json(&sidecar_path(path), &sidecar)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_trace(path: &Path) -> Result<Vec<EpochRow>> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?;
    if header.iter().ne(TRACE_HEADER) {
        return Err(Error::Parse { line: 1, message: format!("unexpected trace header {header:?}") });
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

pub fn read_sidecar(trace: &Path) -> Result<TraceSidecar> {
    let path = sidecar_path(trace);
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}
