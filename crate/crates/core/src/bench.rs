//! Correlation harness: scores a manifest of image pairs and reports rank
//! (SRCC) and linear (PLCC, after a four-parameter logistic fit) correlation
//! against mean opinion scores.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compensate::{score_hdr, score_ldr, CompensationConfig, CompensationMode};
use crate::display::DisplayModel;
use crate::error::{Error, Result};
use crate::imageio::{read_hdr, read_ldr, sniff, FileKind, HdrFormat, HdrImage, LdrImage};
use crate::metrics::BaseMetric;
use crate::optim::NelderMead;
use crate::pooling::AggregationConfig;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Minimum number of pairs for the logistic fit.
pub const MIN_FIT_POINTS: usize = 5;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn check_lengths(x: &[f64], y: &[f64], min: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < min {
        return Err(Error::invalid(format!("need at least {min} points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in correlation input"));
    }
    Ok(())
}

/// Pearson linear correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y, 2)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties assigned their mean rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation.
pub fn srcc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y, 2)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// `b1 * (1/2 - 1/(1 + exp(b2 * (q - b3)))) + b4`.
pub fn logistic(beta: &[f64; 4], q: f64) -> f64 {
    beta[0] * (0.5 - 1.0 / (1.0 + (beta[1] * (q - beta[2])).exp())) + beta[3]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub beta: [f64; 4],
    /// Sum of squared errors against the MOS values.
    pub residual: f64,
    /// True when the curve is strictly monotone (`b1 * b2 != 0`).
    pub monotone: bool,
    /// Index of the multi-start that produced the fit.
    pub start: usize,
}

impl LogisticFit {
    pub fn predict(&self, q: f64) -> f64 {
        logistic(&self.beta, q)
    }
}

// (amplitude multiple of the MOS range, slope in standardized units, centre quantile)
const STARTS: [(f64, f64, f64); 8] = [
    (1.0, 1.0, 0.5),
    (2.0, 1.0, 0.5),
    (1.0, 3.0, 0.5),
    (4.0, 0.5, 0.5),
    (1.0, 1.0, 0.25),
    (1.0, 1.0, 0.75),
    (8.0, 0.25, 0.5),
    (2.0, 2.0, 0.5),
];

fn quantile(v: &[f64], q: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = q * (s.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

fn standardize(v: &[f64]) -> Option<(f64, f64, Vec<f64>)> {
    let m = mean(v);
    let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
    if !(sd > 0.0) {
        return None;
    }
    Some((m, sd, v.iter().map(|x| (x - m) / sd).collect()))
}

/// Fits the four-parameter logistic by Nelder-Mead from eight deterministic
/// starts, then returns the Pearson correlation between the fitted
/// predictions and `mos`.
///
/// Both variables are standardized for the fit, which makes the result
/// invariant to positive affine rescaling of the objective scores.
pub fn plcc_logistic(objective: &[f64], mos: &[f64]) -> Result<(f64, LogisticFit)> {
    check_lengths(objective, mos, MIN_FIT_POINTS)?;
    let (q_mean, q_sd, z) = standardize(objective)
        .ok_or_else(|| Error::UndefinedCorrelation("objective scores are constant".into()))?;
    let (m_mean, m_sd, y) = standardize(mos)
        .ok_or_else(|| Error::UndefinedCorrelation("MOS values are constant".into()))?;
    let direction = if pearson(&z, &y).unwrap_or(0.0) < 0.0 { -1.0 } else { 1.0 };
    let y_range = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - y.iter().cloned().fold(f64::INFINITY, f64::min);

    let sse = |b: &[f64]| -> f64 {
        let beta = [b[0], b[1], b[2], b[3]];
        z.iter()
            .zip(&y)
            .map(|(&zi, &yi)| (logistic(&beta, zi) - yi).powi(2))
            .sum()
    };
    let nm = NelderMead::default();
    let mut best: Option<(usize, [f64; 4], f64)> = None;
    for (i, &(amp, slope, centre)) in STARTS.iter().enumerate() {
        let start = [amp * y_range, direction * slope, quantile(&z, centre), quantile(&y, 0.5)];
        let steps = [0.1 * y_range, 0.5, 0.5, 0.1 * y_range];
        let m = nm.minimize(sse, &start, &steps);
        if !m.value.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|b| m.value < b.2) {
            best = Some((i, [m.x[0], m.x[1], m.x[2], m.x[3]], m.value));
        }
    }
    let (start, b, residual) = best.ok_or(Error::FitFailure {
        best_residual: f64::INFINITY,
    })?;

    let predictions: Vec<f64> = z.iter().map(|&zi| logistic(&b, zi)).collect();
    let plcc = pearson(&predictions, &y).map_err(|_| Error::FitFailure {
        best_residual: residual * m_sd * m_sd,
    })?;
    // back to the caller's units
    let beta = [b[0] * m_sd, b[1] / q_sd, q_mean + q_sd * b[2], b[3] * m_sd + m_mean];
    Ok((
        plcc,
        LogisticFit {
            beta,
            residual: residual * m_sd * m_sd,
            monotone: beta[0] != 0.0 && beta[1] != 0.0,
            start,
        },
    ))
}

/// How to read an entry's images.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatHint {
    /// Decide from magic bytes and extension.
    #[default]
    #[serde(alias = "")]
    Auto,
    Hdr,
    Ldr,
    Rgbe,
    Pfm,
    Png,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    #[serde(rename = "ref")]
    pub reference: PathBuf,
    pub test: PathBuf,
    pub mos: f64,
    #[serde(default)]
    pub format: FormatHint,
}

/// A list of (reference, test, MOS) triples read from CSV with header
/// `ref,test,mos,format`. Relative paths resolve against the manifest's
/// directory.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::parse(&text, base, name)
    }

    pub fn parse(csv_bytes: &[u8], base: &Path, name: String) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(csv_bytes);
        let mut entries = Vec::new();
        for record in reader.deserialize::<ManifestEntry>() {
            let mut entry = record.map_err(|e| {
                let offset = e.position().map(|p| p.byte()).unwrap_or(0);
                Error::format(offset, format!("bad manifest row: {e}"))
            })?;
            if !entry.mos.is_finite() {
                return Err(Error::format(0, format!("non-finite MOS in {entry:?}")));
            }
            entry.reference = base.join(&entry.reference);
            entry.test = base.join(&entry.test);
            entries.push(entry);
        }
        Ok(Self { name, entries })
    }
}

enum Loaded {
    Hdr(HdrImage),
    Ldr(LdrImage),
}

fn load(path: &Path, hint: FormatHint) -> Result<Loaded> {
    let kind = match hint {
        FormatHint::Rgbe => FileKind::Hdr(HdrFormat::Rgbe),
        FormatHint::Pfm => FileKind::Hdr(HdrFormat::Pfm),
        FormatHint::Png | FormatHint::Ldr => FileKind::Ldr,
        FormatHint::Auto => sniff(path)?,
        FormatHint::Hdr => match sniff(path)? {
            FileKind::Hdr(f) => FileKind::Hdr(f),
            FileKind::Ldr => {
                return Err(Error::format(0, format!("{} is not an HDR file", path.display())))
            }
        },
    };
    Ok(match kind {
        FileKind::Hdr(format) => Loaded::Hdr(read_hdr(path, format)?),
        FileKind::Ldr => Loaded::Ldr(read_ldr(path)?),
    })
}

/// Scores one pair of files, routing HDR pairs through the full pipeline and
/// LDR pairs through the forward display model. Mixed pairs are rejected.
pub fn score_files(
    reference: &Path,
    test: &Path,
    hint: FormatHint,
    metric: &BaseMetric,
    model: &DisplayModel,
    comp: &CompensationConfig,
    agg: &AggregationConfig,
) -> Result<crate::compensate::QualityReport> {
    match (load(reference, hint)?, load(test, hint)?) {
        (Loaded::Hdr(r), Loaded::Hdr(t)) => score_hdr(&r, &t, metric, model, comp, agg),
        (Loaded::Ldr(r), Loaded::Ldr(t)) => score_ldr(&r, &t, metric, model),
        _ => Err(Error::invalid(format!(
            "cannot score an HDR/LDR mixed pair ({}, {})",
            reference.display(),
            test.display()
        ))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryScore {
    pub index: usize,
    pub reference: PathBuf,
    pub test: PathBuf,
    pub mos: f64,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryFailure {
    pub index: usize,
    pub reference: PathBuf,
    pub test: PathBuf,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub schema_version: u32,
    pub name: String,
    pub metric: BaseMetric,
    pub mode: CompensationMode,
    pub entries: Vec<EntryScore>,
    pub failures: Vec<EntryFailure>,
    pub srcc: Option<f64>,
    pub plcc: Option<f64>,
    pub logistic: Option<LogisticFit>,
    /// Why a correlation is missing, if one is.
    pub correlation_errors: Vec<String>,
}

/// Scores every manifest entry and correlates the scores with MOS.
///
/// Entries that fail are listed under `failures` and left out of the
/// correlations; at least two must succeed.
pub fn run_benchmark(
    manifest: &DatasetManifest,
    metric: &BaseMetric,
    model: &DisplayModel,
    comp: &CompensationConfig,
    agg: &AggregationConfig,
) -> Result<BenchmarkReport> {
    metric.check_supported()?;
    if manifest.entries.len() < 2 {
        return Err(Error::invalid(format!(
            "manifest {:?} has {} entries, need at least 2",
            manifest.name,
            manifest.entries.len()
        )));
    }
    let results: Vec<Result<f64>> = manifest
        .entries
        .par_iter()
        .map(|e| score_files(&e.reference, &e.test, e.format, metric, model, comp, agg).map(|r| r.score))
        .collect();

    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for (index, (entry, result)) in manifest.entries.iter().zip(results).enumerate() {
        match result {
            Ok(score) => entries.push(EntryScore {
                index,
                reference: entry.reference.clone(),
                test: entry.test.clone(),
                mos: entry.mos,
                score,
            }),
            Err(e) => {
                log::warn!("skipping entry {index} ({}): {e}", entry.test.display());
                failures.push(EntryFailure {
                    index,
                    reference: entry.reference.clone(),
                    test: entry.test.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    if entries.len() < 2 {
        return Err(Error::invalid(format!(
            "only {} of {} entries could be scored",
            entries.len(),
            manifest.entries.len()
        )));
    }

    let scores: Vec<f64> = entries.iter().map(|e| e.score).collect();
    let mos: Vec<f64> = entries.iter().map(|e| e.mos).collect();
    let mut correlation_errors = Vec::new();
    let srcc = srcc(&scores, &mos)
        .map_err(|e| correlation_errors.push(format!("srcc: {e}")))
        .ok();
    let (plcc, logistic) = match plcc_logistic(&scores, &mos) {
        Ok((p, fit)) => (Some(p), Some(fit)),
        Err(e) => {
            correlation_errors.push(format!("plcc: {e}"));
            (None, None)
        }
    };
    Ok(BenchmarkReport {
        schema_version: REPORT_SCHEMA_VERSION,
        name: manifest.name.clone(),
        metric: *metric,
        mode: comp.mode,
        entries,
        failures,
        srcc,
        plcc,
        logistic,
        correlation_errors,
    })
}
