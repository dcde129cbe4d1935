//! Per-AP importance scores and the pairwise redundancy matrix.

use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::FingerprintDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Entropy,
    Variance,
    Average,
    Max,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::Entropy,
        Metric::Variance,
        Metric::Average,
        Metric::Max,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Entropy => "entropy",
            Metric::Variance => "variance",
            Metric::Average => "average",
            Metric::Max => "max",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "entropy" => Ok(Metric::Entropy),
            "variance" => Ok(Metric::Variance),
            "average" => Ok(Metric::Average),
            "max" => Ok(Metric::Max),
            _ => Err(Error::invalid(
                "metric",
                format!("{s:?} is not one of entropy, variance, average, max"),
            )),
        }
    }
}

/// Importance of every AP under one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector {
    pub metric: Metric,
    /// Metric-native values (bits, dBm², dBm).
    pub raw_scores: Vec<f64>,
    /// `raw_scores` min-max scaled to `[0, 1]`.
    pub scores: Vec<f64>,
    /// APs that carry non-zero importance and take part in the redundancy analysis.
    pub active: Vec<bool>,
}

impl ImportanceVector {
    /// Wraps raw scores, deriving normalized scores. `active` defaults to
    /// `raw > 0` when not given.
    pub fn from_raw(metric: Metric, raw_scores: Vec<f64>, active: Option<Vec<bool>>) -> Self {
        let active = active.unwrap_or_else(|| raw_scores.iter().map(|&v| v > 0.0).collect());
        let scores = min_max_scale(&raw_scores, &active);
        Self {
            metric,
            raw_scores,
            scores,
            active,
        }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn num_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// Writes `ap_id,raw,normalized` rows.
    pub fn write_csv(&self, path: &Path, ap_ids: &[String]) -> Result<()> {
        if ap_ids.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: ap_ids.len(),
            });
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        w.write_record(["ap_id", "raw", "normalized", "active"])?;
        for (i, id) in ap_ids.iter().enumerate() {
            w.write_record([
                id.clone(),
                self.raw_scores[i].to_string(),
                self.scores[i].to_string(),
                (self.active[i] as u8).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

fn min_max_scale(raw: &[f64], active: &[bool]) -> Vec<f64> {
    let (lo, hi) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if hi > lo {
        raw.iter().map(|&v| (v - lo) / (hi - lo)).collect()
    } else {
        // Every AP scores the same: active ones get the full reward.
        active.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect()
    }
}

/// Shannon entropy, in bits, of the empirical distribution of distinct values.
pub fn shannon_entropy(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let mut h = 0.0;
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end] == sorted[start] {
            end += 1;
        }
        let p = (end - start) as f64 / m;
        h -= p * p.log2();
        start = end;
    }
    // A single bin gives -1 * log2(1) = -0.0.
    h.max(0.0)
}

/// Unbiased sample variance (Welford's update).
pub fn sample_variance(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: values.len(),
        });
    }
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in values.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    Ok((m2 / (values.len() - 1) as f64).max(0.0))
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn columns(d: &FingerprintDataset) -> Vec<Vec<f64>> {
    (0..d.n()).into_par_iter().map(|ap| d.column(ap)).collect()
}

pub fn importance_entropy(d: &FingerprintDataset) -> ImportanceVector {
    let raw = columns(d).par_iter().map(|c| shannon_entropy(c)).collect();
    ImportanceVector::from_raw(Metric::Entropy, raw, None)
}

pub fn importance_variance(d: &FingerprintDataset) -> Result<ImportanceVector> {
    let raw = columns(d)
        .par_iter()
        .map(|c| sample_variance(c))
        .collect::<Result<Vec<_>>>()?;
    Ok(ImportanceVector::from_raw(Metric::Variance, raw, None))
}

/// Mean RSS per AP. Never-detected APs are inactive.
pub fn importance_average(d: &FingerprintDataset) -> ImportanceVector {
    let raw = columns(d).par_iter().map(|c| mean(c)).collect();
    ImportanceVector::from_raw(Metric::Average, raw, Some(detected_mask(d)))
}

/// Peak RSS per AP. Never-detected APs are inactive.
pub fn importance_max(d: &FingerprintDataset) -> ImportanceVector {
    let raw = columns(d)
        .par_iter()
        .map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    ImportanceVector::from_raw(Metric::Max, raw, Some(detected_mask(d)))
}

fn detected_mask(d: &FingerprintDataset) -> Vec<bool> {
    (0..d.n()).map(|ap| !d.never_detected(ap)).collect()
}

pub fn importance(d: &FingerprintDataset, metric: Metric) -> Result<ImportanceVector> {
    match metric {
        Metric::Entropy => Ok(importance_entropy(d)),
        Metric::Variance => importance_variance(d),
        Metric::Average => Ok(importance_average(d)),
        Metric::Max => Ok(importance_max(d)),
    }
}

/// Absolute Pearson correlation between the RSS columns of active APs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedundancyMatrix {
    n: usize,
    values: Vec<f64>,
    active: Vec<bool>,
}

impl RedundancyMatrix {
    /// Builds a matrix from a dense row-major `n x n` array, validating symmetry and range.
    pub fn from_dense(n: usize, values: Vec<f64>, active: Vec<bool>) -> Result<Self> {
        if values.len() != n * n || active.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: values.len(),
            });
        }
        for i in 0..n {
            for j in 0..n {
                let v = values[i * n + j];
                if !(0.0..=1.0).contains(&v) || v != values[j * n + i] {
                    return Err(Error::invalid(
                        "redundancy",
                        format!("entry ({i}, {j}) = {v} is out of range or asymmetric"),
                    ));
                }
            }
        }
        Ok(Self { n, values, active })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Dense matrix CSV with AP ids as header and first column.
    pub fn write_csv(&self, path: &Path, ap_ids: &[String]) -> Result<()> {
        if ap_ids.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: ap_ids.len(),
            });
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        let mut header = vec![String::from("ap_id")];
        header.extend(ap_ids.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.n {
            let mut rec = vec![ap_ids[i].clone()];
            rec.extend(self.values[i * self.n..(i + 1) * self.n].iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Dot product with a fixed eight-lane reduction order, so results do not
/// depend on how work is scheduled.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

pub fn redundancy(d: &FingerprintDataset, imp: &ImportanceVector) -> Result<RedundancyMatrix> {
    let n = d.n();
    if imp.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: imp.len(),
        });
    }
    if d.m() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: d.m(),
        });
    }
    let active = imp.active.clone();
    let centered: Vec<Option<(Vec<f64>, f64)>> = (0..n)
        .into_par_iter()
        .map(|ap| {
            if !active[ap] {
                return None;
            }
            let mut col = d.column(ap);
            let mu = mean(&col);
            col.iter_mut().for_each(|v| *v -= mu);
            let ss = dot(&col, &col);
            Some((col, ss))
        })
        .collect();

    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; n - i - 1];
            if let Some((ci, si)) = &centered[i] {
                for (off, j) in (i + 1..n).enumerate() {
                    if let Some((cj, sj)) = &centered[j] {
                        if *si > 0.0 && *sj > 0.0 {
                            let r = dot(ci, cj).abs() / (si * sj).sqrt();
                            row[off] = r.min(1.0);
                        }
                    }
                }
            }
            row
        })
        .collect();

    let mut values = vec![0.0; n * n];
    for i in 0..n {
        if active[i] {
            values[i * n + i] = 1.0;
        }
        for (off, &v) in upper[i].iter().enumerate() {
            let j = i + 1 + off;
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    Ok(RedundancyMatrix { n, values, active })
}
