//! WiFi fingerprint databases in the UJIIndoorLoc CSV layout.
//!
//! A fingerprint database pairs, for each of `m` samples, the RSS readings of
//! `n` access points with a location label (longitude, latitude, floor).
//! Readings are stored row-major as dBm after the "not detected" sentinel has
//! been replaced by a configurable floor value.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weakest RSS the UJIIndoorLoc capture reports.
pub const MIN_OBSERVABLE_DBM: f64 = -104.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestConfig {
    /// Prefix identifying access-point columns (`WAP001`, `WAP002`, ...).
    pub ap_prefix: String,
    pub longitude_column: String,
    pub latitude_column: String,
    pub floor_column: String,
    /// Raw value meaning "AP not detected".
    pub raw_sentinel: f64,
    /// dBm value substituted for the sentinel.
    pub not_detected_value: f64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            ap_prefix: "WAP".into(),
            longitude_column: "LONGITUDE".into(),
            latitude_column: "LATITUDE".into(),
            floor_column: "FLOOR".into(),
            raw_sentinel: 100.0,
            not_detected_value: -105.0,
        }
    }
}

/// Min-max scaling parameters for the two horizontal coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelTransform {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl LabelTransform {
    pub fn identity() -> Self {
        Self {
            lat_min: 0.0,
            lat_max: 1.0,
            lon_min: 0.0,
            lon_max: 1.0,
        }
    }

    pub fn lat_to_meters(&self, v: f64) -> f64 {
        self.lat_min + v * (self.lat_max - self.lat_min)
    }

    pub fn lon_to_meters(&self, v: f64) -> f64 {
        self.lon_min + v * (self.lon_max - self.lon_min)
    }

    pub fn lat_normalize(&self, v: f64) -> f64 {
        (v - self.lat_min) / (self.lat_max - self.lat_min)
    }

    pub fn lon_normalize(&self, v: f64) -> f64 {
        (v - self.lon_min) / (self.lon_max - self.lon_min)
    }
}

/// JSON sidecar written next to a dataset dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    #[serde(flatten)]
    pub transform: LabelTransform,
    pub not_detected_value: f64,
}

/// An RSS radio map: `m` samples by `n` access points plus 3D labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintDataset {
    rss: Vec<f64>,
    n: usize,
    latitude: Vec<f64>,
    longitude: Vec<f64>,
    floor: Vec<u32>,
    ap_ids: Vec<String>,
    not_detected_value: f64,
    transform: Option<LabelTransform>,
}

impl FingerprintDataset {
    /// Builds a dataset from a row-major RSS matrix, checking every invariant.
    pub fn new(
        rss: Vec<f64>,
        ap_ids: Vec<String>,
        latitude: Vec<f64>,
        longitude: Vec<f64>,
        floor: Vec<u32>,
        not_detected_value: f64,
    ) -> Result<Self> {
        let n = ap_ids.len();
        let m = latitude.len();
        if n == 0 {
            return Err(Error::Schema("no access-point columns".into()));
        }
        if m == 0 {
            return Err(Error::EmptyDataset);
        }
        if longitude.len() != m || floor.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: longitude.len().min(floor.len()),
            });
        }
        if rss.len() != m * n {
            return Err(Error::DimensionMismatch {
                expected: m * n,
                got: rss.len(),
            });
        }
        let mut seen = HashSet::with_capacity(n);
        for id in &ap_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Schema(format!("duplicate access-point id {id:?}")));
            }
        }
        if let Some(pos) = rss
            .iter()
            .position(|&v| !(v >= not_detected_value && v <= 0.0))
        {
            return Err(Error::Schema(format!(
                "RSS value {} at sample {}, AP {} outside [{not_detected_value}, 0]",
                rss[pos],
                pos / n,
                ap_ids[pos % n]
            )));
        }
        Ok(Self {
            rss,
            n,
            latitude,
            longitude,
            floor,
            ap_ids,
            not_detected_value,
            transform: None,
        })
    }

    /// Number of samples.
    pub fn m(&self) -> usize {
        self.latitude.len()
    }

    /// Number of access points.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, sample: usize) -> &[f64] {
        &self.rss[sample * self.n..(sample + 1) * self.n]
    }

    pub fn rss(&self, sample: usize, ap: usize) -> f64 {
        self.rss[sample * self.n + ap]
    }

    pub fn rss_matrix(&self) -> &[f64] {
        &self.rss
    }

    /// Copies one AP's readings out of the row-major matrix.
    pub fn column(&self, ap: usize) -> Vec<f64> {
        self.rss.iter().skip(ap).step_by(self.n).copied().collect()
    }

    pub fn latitude(&self) -> &[f64] {
        &self.latitude
    }

    pub fn longitude(&self) -> &[f64] {
        &self.longitude
    }

    pub fn floor(&self) -> &[u32] {
        &self.floor
    }

    pub fn ap_ids(&self) -> &[String] {
        &self.ap_ids
    }

    pub fn not_detected_value(&self) -> f64 {
        self.not_detected_value
    }

    /// Normalization applied to the coordinates, if any.
    pub fn transform(&self) -> Option<&LabelTransform> {
        self.transform.as_ref()
    }

    /// The transform mapping stored coordinates back to meters.
    pub fn metric_transform(&self) -> LabelTransform {
        self.transform.unwrap_or_else(LabelTransform::identity)
    }

    /// True when the AP never reports anything but the not-detected value.
    pub fn never_detected(&self, ap: usize) -> bool {
        self.rss
            .iter()
            .skip(ap)
            .step_by(self.n)
            .all(|&v| v == self.not_detected_value)
    }

    /// A new dataset holding the given samples, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut rss = Vec::with_capacity(rows.len() * self.n);
        for &r in rows {
            rss.extend_from_slice(self.row(r));
        }
        Self {
            rss,
            n: self.n,
            latitude: rows.iter().map(|&r| self.latitude[r]).collect(),
            longitude: rows.iter().map(|&r| self.longitude[r]).collect(),
            floor: rows.iter().map(|&r| self.floor[r]).collect(),
            ap_ids: self.ap_ids.clone(),
            not_detected_value: self.not_detected_value,
            transform: self.transform,
        }
    }

    /// Appends the samples of `other`, which must share AP ids and coordinate frame.
    pub fn concat(mut self, other: &Self) -> Result<Self> {
        if self.ap_ids != other.ap_ids {
            return Err(Error::Schema(
                "cannot concatenate datasets with different access-point columns".into(),
            ));
        }
        if self.not_detected_value != other.not_detected_value || self.transform != other.transform
        {
            return Err(Error::Schema(
                "cannot concatenate datasets with different sentinel or coordinate frame".into(),
            ));
        }
        self.rss.extend_from_slice(&other.rss);
        self.latitude.extend_from_slice(&other.latitude);
        self.longitude.extend_from_slice(&other.longitude);
        self.floor.extend_from_slice(&other.floor);
        Ok(self)
    }

    /// Min-max scales latitude and longitude to `[0, 1]`, keeping the inverse
    /// transform so errors can still be reported in meters. Applying it to an
    /// already normalized dataset leaves the values unchanged.
    pub fn normalize_labels(&self) -> Result<Self> {
        if self.m() < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                got: self.m(),
            });
        }
        let (lat_lo, lat_hi) = min_max(&self.latitude);
        let (lon_lo, lon_hi) = min_max(&self.longitude);
        if lat_lo == lat_hi {
            return Err(Error::DegenerateRange("latitude"));
        }
        if lon_lo == lon_hi {
            return Err(Error::DegenerateRange("longitude"));
        }
        let step = LabelTransform {
            lat_min: lat_lo,
            lat_max: lat_hi,
            lon_min: lon_lo,
            lon_max: lon_hi,
        };
        let mut out = self.clone();
        out.latitude = self
            .latitude
            .iter()
            .map(|&v| step.lat_normalize(v).clamp(0.0, 1.0))
            .collect();
        out.longitude = self
            .longitude
            .iter()
            .map(|&v| step.lon_normalize(v).clamp(0.0, 1.0))
            .collect();
        // Compose with any earlier normalization so the stored transform always
        // maps back to the original metric frame.
        let prev = self.metric_transform();
        out.transform = Some(LabelTransform {
            lat_min: prev.lat_to_meters(lat_lo),
            lat_max: prev.lat_to_meters(lat_hi),
            lon_min: prev.lon_to_meters(lon_lo),
            lon_max: prev.lon_to_meters(lon_hi),
        });
        Ok(out)
    }

    pub fn sidecar(&self) -> Sidecar {
        Sidecar {
            transform: self.metric_transform(),
            not_detected_value: self.not_detected_value,
        }
    }

    /// Writes the dataset in the ingestion schema: metric coordinates, and the
    /// not-detected value mapped back to the raw sentinel.
    pub fn write_csv(&self, path: &Path, cfg: &IngestConfig) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        let mut header: Vec<&str> = self.ap_ids.iter().map(String::as_str).collect();
        header.extend([
            cfg.longitude_column.as_str(),
            cfg.latitude_column.as_str(),
            cfg.floor_column.as_str(),
        ]);
        w.write_record(&header)?;
        let t = self.metric_transform();
        let mut record: Vec<String> = Vec::with_capacity(self.n + 3);
        for s in 0..self.m() {
            record.clear();
            record.extend(self.row(s).iter().map(|&v| {
                if v == self.not_detected_value {
                    format_number(cfg.raw_sentinel)
                } else {
                    format_number(v)
                }
            }));
            let (lon, lat) = match self.transform {
                Some(_) => (
                    t.lon_to_meters(self.longitude[s]),
                    t.lat_to_meters(self.latitude[s]),
                ),
                None => (self.longitude[s], self.latitude[s]),
            };
            record.push(format_number(lon));
            record.push(format_number(lat));
            record.push(self.floor[s].to_string());
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Writes `path` as CSV plus `path` with a `.json` extension holding the
    /// coordinate transform and sentinel substitution.
    pub fn dump(&self, path: &Path, cfg: &IngestConfig) -> Result<PathBuf> {
        self.write_csv(path, cfg)?;
        let sidecar_path = path.with_extension("json");
        let file = File::create(&sidecar_path).map_err(|e| Error::io(&sidecar_path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, &self.sidecar())?;
        w.flush().map_err(|e| Error::io(&sidecar_path, e))?;
        Ok(sidecar_path)
    }
}

fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

/// Reads a UJIIndoorLoc-style CSV. Columns other than the AP columns and the
/// three label columns (BUILDINGID, USERID, ...) are ignored.
pub fn load_csv(path: &Path, cfg: &IngestConfig) -> Result<FingerprintDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(BufReader::new(file), cfg)
}

/// Loads several CSVs sharing one schema and concatenates them in order.
pub fn load_many(paths: &[PathBuf], cfg: &IngestConfig) -> Result<FingerprintDataset> {
    let (first, rest) = paths
        .split_first()
        .ok_or_else(|| Error::invalid("dataset", "at least one path is required"))?;
    let mut out = load_csv(first, cfg)?;
    for p in rest {
        out = out.concat(&load_csv(p, cfg)?)?;
    }
    Ok(out)
}

pub fn read_csv<R: std::io::Read>(reader: R, cfg: &IngestConfig) -> Result<FingerprintDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column {name:?}")))
    };
    let lon_col = find(&cfg.longitude_column)?;
    let lat_col = find(&cfg.latitude_column)?;
    let floor_col = find(&cfg.floor_column)?;
    let ap_cols: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with(cfg.ap_prefix.as_str()))
        .map(|(i, _)| i)
        .collect();
    if ap_cols.is_empty() {
        return Err(Error::Schema(format!(
            "no access-point columns with prefix {:?}",
            cfg.ap_prefix
        )));
    }
    let ap_ids: Vec<String> = ap_cols.iter().map(|&c| headers[c].to_string()).collect();

    let mut rss = Vec::new();
    let mut latitude = Vec::new();
    let mut longitude = Vec::new();
    let mut floor = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut row = 0usize;
    while rdr.read_record(&mut record)? {
        row += 1;
        let cell = |col: usize| -> Result<f64> {
            let raw = record.get(col).unwrap_or("");
            raw.parse::<f64>().map_err(|_| Error::Parse {
                row,
                column: col + 1,
                name: headers[col].to_string(),
                value: raw.to_string(),
            })
        };
        for &c in &ap_cols {
            let v = cell(c)?;
            let v = if v == cfg.raw_sentinel {
                cfg.not_detected_value
            } else if (cfg.not_detected_value..=0.0).contains(&v) {
                v
            } else {
                return Err(Error::Schema(format!(
                    "row {row}, column {} ({}): RSS {v} outside [{}, 0] and not the sentinel {}",
                    c + 1,
                    &headers[c],
                    cfg.not_detected_value,
                    cfg.raw_sentinel
                )));
            };
            rss.push(v);
        }
        longitude.push(cell(lon_col)?);
        latitude.push(cell(lat_col)?);
        let f = cell(floor_col)?;
        if f < 0.0 || f.fract() != 0.0 || f > u32::MAX as f64 {
            return Err(Error::Parse {
                row,
                column: floor_col + 1,
                name: headers[floor_col].to_string(),
                value: record.get(floor_col).unwrap_or("").to_string(),
            });
        }
        floor.push(f as u32);
    }
    if row == 0 {
        return Err(Error::EmptyDataset);
    }
    FingerprintDataset::new(
        rss,
        ap_ids,
        latitude,
        longitude,
        floor,
        cfg.not_detected_value,
    )
}

/// A floor-stratified train/test partition.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: FingerprintDataset,
    pub test: FingerprintDataset,
    pub seed: u64,
    /// Source row indices of each partition, ascending.
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Splits `d` so that each floor contributes `round(count * test_fraction)`
/// samples to the test set (at least one to each side).
pub fn split(d: &FingerprintDataset, test_fraction: f64, seed: u64) -> Result<DatasetSplit> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(
            "test_fraction",
            format!("{test_fraction} is not in (0, 1)"),
        ));
    }
    let mut by_floor: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &f) in d.floor().iter().enumerate() {
        by_floor.entry(f).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_indices = Vec::with_capacity(d.m());
    let mut test_indices = Vec::new();
    for (floor, mut idx) in by_floor {
        if idx.len() < 2 {
            return Err(Error::Stratification {
                floor,
                count: idx.len(),
            });
        }
        idx.shuffle(&mut rng);
        let n_test = ((idx.len() as f64) * test_fraction)
            .round()
            .clamp(1.0, (idx.len() - 1) as f64) as usize;
        test_indices.extend_from_slice(&idx[..n_test]);
        train_indices.extend_from_slice(&idx[n_test..]);
    }
    train_indices.sort_unstable();
    test_indices.sort_unstable();
    Ok(DatasetSplit {
        train: d.select_rows(&train_indices),
        test: d.select_rows(&test_indices),
        seed,
        train_indices,
        test_indices,
    })
}
