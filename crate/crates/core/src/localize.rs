//! kNN fingerprint matching restricted to a subset of APs, and the 3D error
//! and floor-accuracy report used to score a selection.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetSplit, FingerprintDataset, LabelTransform};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingHandling {
    /// Undetected APs keep the substituted dBm value.
    SentinelValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalizerConfig {
    pub k_neighbors: usize,
    pub floor_height_m: f64,
    pub distance: Distance,
    pub missing_handling: MissingHandling,
}

impl Default for LocalizerConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 3,
            floor_height_m: 3.0,
            distance: Distance::Euclidean,
            missing_handling: MissingHandling::SentinelValue,
        }
    }
}

/// A location estimate or label. Horizontal coordinates are in whatever frame
/// the dataset stores (normalized after `normalize_labels`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub lat: f64,
    pub lon: f64,
    pub floor: u32,
}

impl Position {
    pub fn to_meters(self, t: &LabelTransform) -> Self {
        Self {
            lat: t.lat_to_meters(self.lat),
            lon: t.lon_to_meters(self.lon),
            floor: self.floor,
        }
    }
}

/// Euclidean distance with floors converted to height.
pub fn error_3d(pred: &Position, truth: &Position, floor_height_m: f64) -> f64 {
    let dz = (pred.floor as f64 - truth.floor as f64) * floor_height_m;
    let dx = pred.lat - truth.lat;
    let dy = pred.lon - truth.lon;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

fn check_subset(subset: &[usize], n: usize) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::invalid("subset", "at least one AP is required"));
    }
    let mut seen = vec![false; n];
    for &i in subset {
        if i >= n {
            return Err(Error::invalid("subset", format!("AP index {i} out of range (n = {n})")));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::invalid("subset", format!("AP index {i} repeated")));
        }
    }
    Ok(())
}

/// Training fingerprints projected onto a subset of APs.
pub struct Localizer<'a> {
    train: &'a FingerprintDataset,
    subset: Vec<usize>,
    /// Row-major `m x |subset|`.
    features: Vec<f32>,
    cfg: LocalizerConfig,
}

impl<'a> Localizer<'a> {
    pub fn new(train: &'a FingerprintDataset, subset: &[usize], cfg: LocalizerConfig) -> Result<Self> {
        check_subset(subset, train.n())?;
        if cfg.k_neighbors == 0 || cfg.k_neighbors > train.m() {
            return Err(Error::invalid(
                "k_neighbors",
                format!("{} is not in [1, {}]", cfg.k_neighbors, train.m()),
            ));
        }
        let mut features = Vec::with_capacity(train.m() * subset.len());
        for s in 0..train.m() {
            let row = train.row(s);
            features.extend(subset.iter().map(|&a| row[a] as f32));
        }
        Ok(Self {
            train,
            subset: subset.to_vec(),
            features,
            cfg,
        })
    }

    /// The `k` nearest training samples as `(squared distance, index)`,
    /// nearest first, ties by index.
    pub fn neighbours(&self, query_rss: &[f64]) -> Result<Vec<(f32, usize)>> {
        if query_rss.len() != self.train.n() {
            return Err(Error::DimensionMismatch {
                expected: self.train.n(),
                got: query_rss.len(),
            });
        }
        let q: Vec<f32> = self.subset.iter().map(|&a| query_rss[a] as f32).collect();
        Ok(nearest(&self.features, &q, self.cfg.k_neighbors))
    }

    pub fn predict(&self, query_rss: &[f64]) -> Result<Position> {
        let nb = self.neighbours(query_rss)?;
        let kf = nb.len() as f64;
        let lat = nb.iter().map(|&(_, i)| self.train.latitude()[i]).sum::<f64>() / kf;
        let lon = nb.iter().map(|&(_, i)| self.train.longitude()[i]).sum::<f64>() / kf;
        let floor = majority_floor(nb.iter().map(|&(_, i)| self.train.floor()[i]));
        Ok(Position { lat, lon, floor })
    }
}

fn nearest(features: &[f32], q: &[f32], k: usize) -> Vec<(f32, usize)> {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the feature was detected at runtime.
            return unsafe { nearest_avx2(features, q, k) };
        }
    }
    nearest_scalar(features, q, k)
}

// Same lane layout as the scalar build, so distances are bit-identical.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn nearest_avx2(features: &[f32], q: &[f32], k: usize) -> Vec<(f32, usize)> {
    nearest_scalar(features, q, k)
}

#[inline(always)]
fn nearest_scalar(features: &[f32], q: &[f32], k: usize) -> Vec<(f32, usize)> {
    let mut best: Vec<(f32, usize)> = Vec::with_capacity(k + 1);
    for (idx, row) in features.chunks_exact(q.len()).enumerate() {
        let dist = squared_distance(q, row);
        if best.len() == k && dist >= best[k - 1].0 {
            continue;
        }
        let pos = best.partition_point(|&(bd, _)| bd <= dist);
        best.insert(pos, (dist, idx));
        best.truncate(k);
    }
    best
}

#[inline(always)]
fn squared_distance(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            let t = x[k] - y[k];
            acc[k] += t * t;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        let t = x - y;
        tail += t * t;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// Most frequent floor; among tied floors the one met first (nearest) wins.
fn majority_floor(floors_nearest_first: impl Iterator<Item = u32>) -> u32 {
    let mut tally: Vec<(u32, usize)> = Vec::new();
    for f in floors_nearest_first {
        match tally.iter_mut().find(|(g, _)| *g == f) {
            Some(e) => e.1 += 1,
            None => tally.push((f, 1)),
        }
    }
    let top = tally.iter().map(|e| e.1).max().unwrap_or(0);
    tally
        .into_iter()
        .find(|e| e.1 == top)
        .map(|e| e.0)
        .unwrap_or(0)
}

/// Predicts the location of one query from the training fingerprints.
pub fn predict(
    train: &FingerprintDataset,
    query_rss: &[f64],
    subset: &[usize],
    cfg: &LocalizerConfig,
) -> Result<Position> {
    Localizer::new(train, subset, *cfg)?.predict(query_rss)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub per_query_error_m: Vec<f64>,
    pub per_query_floor_hit: Vec<bool>,
    pub mean_error_m: f64,
    pub median_error_m: f64,
    pub p95_error_m: f64,
    pub floor_accuracy: f64,
    pub num_aps_used: usize,
    pub n_total: usize,
    pub reduction_fraction: f64,
    /// How floors are classified; recorded so reports are not mistaken for
    /// results from a different classifier.
    pub floor_classifier: String,
}

impl LocalizationReport {
    pub fn from_errors(
        errors: Vec<f64>,
        floor_hits: Vec<bool>,
        num_aps_used: usize,
        n_total: usize,
        k_neighbors: usize,
    ) -> Self {
        let q = errors.len().max(1) as f64;
        let mut sorted = errors.clone();
        sorted.sort_by(f64::total_cmp);
        Self {
            mean_error_m: errors.iter().sum::<f64>() / q,
            median_error_m: percentile(&sorted, 0.5),
            p95_error_m: percentile(&sorted, 0.95),
            floor_accuracy: floor_hits.iter().filter(|&&h| h).count() as f64 / q,
            per_query_error_m: errors,
            per_query_floor_hit: floor_hits,
            num_aps_used,
            n_total,
            reduction_fraction: reduction_fraction(num_aps_used, n_total),
            floor_classifier: format!("knn-majority-vote(k={k_neighbors})"),
        }
    }

    /// One row per query: `index,error_m,floor_hit`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        w.write_record(["index", "error_m", "floor_hit"])?;
        for (i, (e, h)) in self
            .per_query_error_m
            .iter()
            .zip(&self.per_query_floor_hit)
            .enumerate()
        {
            w.write_record([i.to_string(), e.to_string(), (*h as u8).to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

pub fn reduction_fraction(num_aps_used: usize, n_total: usize) -> f64 {
    1.0 - num_aps_used as f64 / n_total as f64
}

/// Linear-interpolation percentile of ascending data.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        len => {
            let pos = q * (len - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    }
}

/// Localizes every test sample using only `subset` and reports errors in meters.
pub fn evaluate(
    split: &DatasetSplit,
    subset: &[usize],
    cfg: &LocalizerConfig,
) -> Result<LocalizationReport> {
    let train = &split.train;
    let test = &split.test;
    if test.n() != train.n() {
        return Err(Error::DimensionMismatch {
            expected: train.n(),
            got: test.n(),
        });
    }
    let loc = Localizer::new(train, subset, *cfg)?;
    let train_t = train.metric_transform();
    let test_t = test.metric_transform();
    let results: Vec<(f64, bool)> = (0..test.m())
        .into_par_iter()
        .map(|s| -> Result<(f64, bool)> {
            let pred = loc.predict(test.row(s))?.to_meters(&train_t);
            let truth = Position {
                lat: test.latitude()[s],
                lon: test.longitude()[s],
                floor: test.floor()[s],
            }
            .to_meters(&test_t);
            Ok((
                error_3d(&pred, &truth, cfg.floor_height_m),
                pred.floor == truth.floor,
            ))
        })
        .collect::<Result<_>>()?;
    let (errors, hits) = results.into_iter().unzip();
    Ok(LocalizationReport::from_errors(
        errors,
        hits,
        subset.len(),
        train.n(),
        cfg.k_neighbors,
    ))
}
