//! End-to-end experiments: ingest, analyze, build, solve, evaluate, repeated
//! over seeded trials and optionally over a swept parameter.
//!
//! Trial `t` uses seed `base_seed + t` for both the train/test split and the
//! samplers. With an output directory, each run writes
//!
//! * `selection_<method>_<trial>.json`, `localization_<method>_<trial>.json`
//!   and `samples_<method>_<trial>.json` per method and trial,
//! * `aggregate.csv` with mean/std across trials,
//! * `timing.csv` with wall-clock timings and time-to-solution,
//! * `manifest.json` with the full config, seeds and artifact hashes.
//!
//! A sweep writes one such directory per swept value plus `sweep.csv`.
//! Timing-dependent files are listed as volatile in the manifest and are not
//! hashed; everything else is bit-reproducible from the manifest's config.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{self, ImportanceVector, Metric, RedundancyMatrix};
use crate::anneal::{self, AnnealConfig, SampleSet, Sampler, SelectionResult};
use crate::dataset::{self, DatasetSplit, FingerprintDataset, IngestConfig};
use crate::error::{Error, Result};
use crate::localize::{self, LocalizationReport, LocalizerConfig};
use crate::qubo::{self, BRUTE_FORCE_LIMIT};
use crate::synth::{self, SyntheticConfig};

/// A way of choosing APs: one of the samplers, or the all-AP baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Sa,
    Sqa,
    Exact,
    AllAps,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Sa => "sa",
            Method::Sqa => "sqa",
            Method::Exact => "exact",
            Method::AllAps => "all-aps",
        }
    }

    pub fn sampler(self) -> Option<Sampler> {
        match self {
            Method::Sa => Some(Sampler::Sa),
            Method::Sqa => Some(Sampler::Sqa),
            Method::Exact => Some(Sampler::Exact),
            Method::AllAps => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sa" => Ok(Method::Sa),
            "sqa" => Ok(Method::Sqa),
            "exact" => Ok(Method::Exact),
            "all-aps" | "all_aps" => Ok(Method::AllAps),
            _ => Err(Error::invalid(
                "sampler",
                format!("{s:?} is not one of sa, sqa, exact, all-aps"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    /// UJIIndoorLoc-style CSV files, concatenated in order.
    Csv(Vec<PathBuf>),
    Synthetic(SyntheticConfig),
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synthetic(SyntheticConfig::default())
    }
}

/// Parameters that can be swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Alpha,
    Eta,
    K,
    Metric,
    Beta,
    Gamma,
    Sweeps,
    Reads,
    Trotter,
    Knn,
}

impl SweepParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParameter::Alpha => "alpha",
            SweepParameter::Eta => "eta",
            SweepParameter::K => "k",
            SweepParameter::Metric => "metric",
            SweepParameter::Beta => "beta",
            SweepParameter::Gamma => "gamma",
            SweepParameter::Sweeps => "sweeps",
            SweepParameter::Reads => "reads",
            SweepParameter::Trotter => "trotter",
            SweepParameter::Knn => "knn",
        }
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "alpha" => SweepParameter::Alpha,
            "eta" => SweepParameter::Eta,
            "k" | "budget-k" => SweepParameter::K,
            "metric" => SweepParameter::Metric,
            "beta" => SweepParameter::Beta,
            "gamma" => SweepParameter::Gamma,
            "sweeps" | "num-sweeps" => SweepParameter::Sweeps,
            "reads" | "num-reads" => SweepParameter::Reads,
            "trotter" | "trotter-slices" => SweepParameter::Trotter,
            "knn" | "k-neighbors" => SweepParameter::Knn,
            _ => {
                return Err(Error::invalid(
                    "sweep",
                    format!("unknown parameter {s:?}"),
                ))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub parameter: SweepParameter,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub ingest: IngestConfig,
    pub metric: Metric,
    pub alpha: f64,
    pub eta: f64,
    pub k: usize,
    pub anneal: AnnealConfig,
    pub localizer: LocalizerConfig,
    pub samplers: Vec<Method>,
    pub sweep: Option<SweepAxis>,
    pub trials: usize,
    /// Trial `t` uses `seed + t`.
    pub seed: u64,
    pub test_fraction: f64,
    /// Confidence level for time-to-solution.
    pub target_probability: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::default(),
            ingest: IngestConfig::default(),
            metric: Metric::Entropy,
            alpha: 0.8,
            eta: 2.0,
            k: 20,
            anneal: AnnealConfig::default(),
            localizer: LocalizerConfig::default(),
            samplers: vec![Method::Sa, Method::Sqa, Method::AllAps],
            sweep: None,
            trials: 10,
            seed: 1,
            test_fraction: 0.2,
            target_probability: 0.99,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be positive"));
        }
        if self.samplers.is_empty() {
            return Err(Error::invalid("sampler", "at least one sampler is required"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid("alpha", format!("{} is not in [0, 1]", self.alpha)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid("eta", format!("{} must be positive", self.eta)));
        }
        if self.k == 0 {
            return Err(Error::invalid("budget_k", "must be at least 1"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::invalid(
                "test_fraction",
                format!("{} is not in (0, 1)", self.test_fraction),
            ));
        }
        if !(self.target_probability > 0.0 && self.target_probability < 1.0) {
            return Err(Error::invalid(
                "target_probability",
                format!("{} is not in (0, 1)", self.target_probability),
            ));
        }
        if self.localizer.k_neighbors == 0 {
            return Err(Error::invalid("knn", "must be at least 1"));
        }
        if let DatasetSource::Csv(paths) = &self.dataset {
            if paths.is_empty() {
                return Err(Error::invalid("dataset", "at least one CSV path is required"));
            }
        }
        self.anneal.validate()?;
        for p in self.points()? {
            if let Some(v) = &p {
                self.with_value(v)?.validate_point()?;
            }
        }
        Ok(())
    }

    fn validate_point(&self) -> Result<()> {
        self.anneal.validate()?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid("alpha", format!("{} is not in [0, 1]", self.alpha)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid("eta", format!("{} must be positive", self.eta)));
        }
        if self.k == 0 || self.localizer.k_neighbors == 0 {
            return Err(Error::invalid("sweep", "k and knn must be at least 1"));
        }
        Ok(())
    }

    fn points(&self) -> Result<Vec<Option<String>>> {
        match &self.sweep {
            None => Ok(vec![None]),
            Some(axis) if axis.values.is_empty() => {
                Err(Error::invalid("sweep", "the value list is empty"))
            }
            Some(axis) => Ok(axis.values.iter().cloned().map(Some).collect()),
        }
    }

    /// A copy with the swept parameter set to `value`.
    pub fn with_value(&self, value: &str) -> Result<Self> {
        let axis = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::invalid("sweep", "no sweep axis configured"))?;
        let num = || -> Result<f64> {
            value
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid("sweep", format!("{value:?} is not a number")))
        };
        let count = || -> Result<usize> {
            value
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::invalid("sweep", format!("{value:?} is not a count")))
        };
        let mut c = self.clone();
        c.sweep = None;
        match axis.parameter {
            SweepParameter::Alpha => c.alpha = num()?,
            SweepParameter::Eta => c.eta = num()?,
            SweepParameter::K => c.k = count()?,
            SweepParameter::Metric => c.metric = value.parse()?,
            SweepParameter::Beta => c.anneal.beta = num()?,
            SweepParameter::Gamma => c.anneal.gamma = num()?,
            SweepParameter::Sweeps => c.anneal.num_sweeps = count()?,
            SweepParameter::Reads => c.anneal.num_reads = count()?,
            SweepParameter::Trotter => c.anneal.trotter_slices = count()?,
            SweepParameter::Knn => c.localizer.k_neighbors = count()?,
        }
        Ok(c)
    }

    pub fn trial_seeds(&self) -> Vec<u64> {
        (0..self.trials as u64).map(|t| self.seed + t).collect()
    }
}

/// Loads (or generates) the dataset and normalizes its coordinates.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<FingerprintDataset> {
    let raw = match &cfg.dataset {
        DatasetSource::Csv(paths) => dataset::load_many(paths, &cfg.ingest)?,
        DatasetSource::Synthetic(s) => synth::generate(s)?,
    };
    raw.normalize_labels()
}

/// Summary of one method on one trial (at one sweep point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub value: Option<String>,
    pub trial: usize,
    pub seed: u64,
    pub method: Method,
    pub achieved_k: usize,
    pub best_energy: Option<f64>,
    pub p_success: Option<f64>,
    pub reference_energy: Option<f64>,
    pub mean_error_m: f64,
    pub median_error_m: f64,
    pub p95_error_m: f64,
    pub floor_accuracy: f64,
    pub num_aps_used: usize,
    pub reduction_fraction: f64,
    pub total_anneal_seconds: Option<f64>,
    pub per_read_seconds: Option<f64>,
    pub tts_seconds: Option<f64>,
}

/// Full artifacts of one method on one trial.
#[derive(Debug, Clone)]
pub struct TrialArtifacts {
    pub record: TrialRecord,
    pub selection: Option<SelectionResult>,
    pub report: LocalizationReport,
    pub samples: Option<SampleSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub value: Option<String>,
    pub method: Method,
    pub trials: usize,
    pub achieved_k_mean: f64,
    pub achieved_k_min: usize,
    pub achieved_k_max: usize,
    pub k_hit_fraction: f64,
    pub reduction_fraction_mean: f64,
    pub mean_error_m_mean: f64,
    pub mean_error_m_std: f64,
    pub median_error_m_mean: f64,
    pub p95_error_m_mean: f64,
    pub floor_accuracy_mean: f64,
    pub floor_accuracy_std: f64,
    pub best_energy_mean: Option<f64>,
    pub p_success_mean: Option<f64>,
    pub tts_mean_seconds: Option<f64>,
    pub tts_defined_fraction: Option<f64>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean/std across trials of each (sweep value, method) group, in first-seen order.
pub fn aggregate(records: &[TrialRecord], target_k: &dyn Fn(Option<&str>) -> usize) -> Vec<AggregateRow> {
    let mut order: Vec<(Option<String>, Method)> = Vec::new();
    let mut groups: HashMap<(Option<String>, Method), Vec<&TrialRecord>> = HashMap::new();
    for r in records {
        let key = (r.value.clone(), r.method);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let rs = &groups[&key];
            let n = rs.len();
            let k_target = target_k(key.0.as_deref());
            let col = |f: &dyn Fn(&TrialRecord) -> f64| -> Vec<f64> { rs.iter().map(|r| f(r)).collect() };
            let opt_mean = |f: &dyn Fn(&TrialRecord) -> Option<f64>| -> Option<f64> {
                let v: Vec<f64> = rs.iter().filter_map(|r| f(r)).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            let (err_mean, err_std) = mean_std(&col(&|r| r.mean_error_m));
            let (floor_mean, floor_std) = mean_std(&col(&|r| r.floor_accuracy));
            let is_sampler = key.1.sampler().is_some();
            AggregateRow {
                value: key.0.clone(),
                method: key.1,
                trials: n,
                achieved_k_mean: mean_std(&col(&|r| r.achieved_k as f64)).0,
                achieved_k_min: rs.iter().map(|r| r.achieved_k).min().unwrap_or(0),
                achieved_k_max: rs.iter().map(|r| r.achieved_k).max().unwrap_or(0),
                k_hit_fraction: rs.iter().filter(|r| r.achieved_k == k_target).count() as f64
                    / n as f64,
                reduction_fraction_mean: mean_std(&col(&|r| r.reduction_fraction)).0,
                mean_error_m_mean: err_mean,
                mean_error_m_std: err_std,
                median_error_m_mean: mean_std(&col(&|r| r.median_error_m)).0,
                p95_error_m_mean: mean_std(&col(&|r| r.p95_error_m)).0,
                floor_accuracy_mean: floor_mean,
                floor_accuracy_std: floor_std,
                best_energy_mean: opt_mean(&|r| r.best_energy),
                p_success_mean: opt_mean(&|r| r.p_success),
                tts_mean_seconds: opt_mean(&|r| r.tts_seconds),
                tts_defined_fraction: is_sampler.then(|| {
                    rs.iter().filter(|r| r.tts_seconds.is_some()).count() as f64 / n as f64
                }),
            }
        })
        .collect()
}

/// Analysis results shared by all sweep points of one trial.
struct TrialContext {
    split: DatasetSplit,
    analysis: HashMap<Metric, (ImportanceVector, RedundancyMatrix)>,
    baseline: HashMap<usize, LocalizationReport>,
}

impl TrialContext {
    fn analysis(&mut self, metric: Metric) -> Result<&(ImportanceVector, RedundancyMatrix)> {
        if !self.analysis.contains_key(&metric) {
            let imp = analysis::importance(&self.split.train, metric)?;
            let red = analysis::redundancy(&self.split.train, &imp)?;
            self.analysis.insert(metric, (imp, red));
        }
        Ok(&self.analysis[&metric])
    }
}

/// Everything produced by [`sweep`] (or [`run`]).
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub m: usize,
    pub n: usize,
    pub artifacts: Vec<TrialArtifacts>,
    pub aggregates: Vec<AggregateRow>,
}

impl ExperimentOutcome {
    pub fn records(&self) -> impl Iterator<Item = &TrialRecord> {
        self.artifacts.iter().map(|a| &a.record)
    }

    pub fn aggregate_for(&self, value: Option<&str>, method: Method) -> Option<&AggregateRow> {
        self.aggregates
            .iter()
            .find(|a| a.value.as_deref() == value && a.method == method)
    }

    pub fn record(&self, value: Option<&str>, trial: usize, method: Method) -> Option<&TrialRecord> {
        self.records()
            .find(|r| r.value.as_deref() == value && r.trial == trial && r.method == method)
    }
}

/// Runs a single configuration (any sweep axis is ignored).
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let mut single = cfg.clone();
    single.sweep = None;
    sweep_on(&single, &load_dataset(&single)?)
}

/// Runs every value of the sweep axis (or the single configuration when there is none).
pub fn sweep(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    sweep_on(cfg, &load_dataset(cfg)?)
}

/// Like [`sweep`] on an already loaded, normalized dataset.
pub fn sweep_on(cfg: &ExperimentConfig, data: &FingerprintDataset) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let points = cfg.points()?;
    let point_cfgs: Vec<(Option<String>, ExperimentConfig)> = points
        .into_iter()
        .map(|p| match &p {
            Some(v) => cfg.with_value(v).map(|c| (p.clone(), c)),
            None => Ok((None, cfg.clone())),
        })
        .collect::<Result<_>>()?;
    for (_, pc) in &point_cfgs {
        if pc.k > data.n() {
            return Err(Error::invalid(
                "budget_k",
                format!("{} exceeds the number of APs ({})", pc.k, data.n()),
            ));
        }
    }

    let mut artifacts = Vec::new();
    for (trial, seed) in cfg.trial_seeds().into_iter().enumerate() {
        let mut ctx = TrialContext {
            split: dataset::split(data, cfg.test_fraction, seed)?,
            analysis: HashMap::new(),
            baseline: HashMap::new(),
        };
        let mut solved = Vec::with_capacity(point_cfgs.len());
        for (_, pc) in &point_cfgs {
            solved.push(solve_point(&mut ctx, pc, seed)?);
        }
        // Points that share a QUBO (only sampler settings differ) share one
        // time-to-solution reference: the exact optimum, or the best energy
        // any of them reached.
        let references: Vec<Option<f64>> = solved
            .iter()
            .map(|sp| {
                sp.model_key.map(|key| {
                    sp.exact.unwrap_or_else(|| {
                        solved
                            .iter()
                            .filter(|o| o.model_key == Some(key))
                            .flat_map(|o| o.samples.iter().map(|(_, s)| s.best().energy))
                            .fold(f64::INFINITY, f64::min)
                    })
                })
            })
            .collect();
        for (((value, pc), sp), reference) in point_cfgs.iter().zip(solved).zip(references) {
            artifacts.extend(finish_point(&mut ctx, pc, value.clone(), trial, seed, sp, reference)?);
        }
    }

    let target_k: HashMap<Option<String>, usize> =
        point_cfgs.iter().map(|(v, c)| (v.clone(), c.k)).collect();
    let records: Vec<TrialRecord> = artifacts.iter().map(|a| a.record.clone()).collect();
    let aggregates = aggregate(&records, &|v| target_k[&v.map(str::to_string)]);
    Ok(ExperimentOutcome {
        config: cfg.clone(),
        m: data.m(),
        n: data.n(),
        artifacts,
        aggregates,
    })
}

/// Identifies the QUBO of a sweep point within one trial.
type ModelKey = (Metric, u64, u64, usize);

struct SolvedPoint {
    model_key: Option<ModelKey>,
    exact: Option<f64>,
    samples: Vec<(Method, SampleSet)>,
}

fn solve_point(ctx: &mut TrialContext, cfg: &ExperimentConfig, seed: u64) -> Result<SolvedPoint> {
    let anneal_cfg = AnnealConfig {
        seed,
        ..cfg.anneal
    };
    let mut out = SolvedPoint {
        model_key: None,
        exact: None,
        samples: Vec::new(),
    };
    if !cfg.samplers.iter().any(|m| m.sampler().is_some()) {
        return Ok(out);
    }
    let (imp, red) = ctx.analysis(cfg.metric)?;
    let model = qubo::build(imp, red, cfg.alpha, cfg.eta, cfg.k)?;
    for &method in &cfg.samplers {
        if let Some(s) = method.sampler() {
            out.samples.push((method, anneal::sample(&model, s, &anneal_cfg)?));
        }
    }
    out.model_key = Some((cfg.metric, cfg.alpha.to_bits(), cfg.eta.to_bits(), cfg.k));
    if model.n() <= BRUTE_FORCE_LIMIT {
        out.exact = Some(qubo::brute_force(&model)?.energy);
    }
    Ok(out)
}

fn finish_point(
    ctx: &mut TrialContext,
    cfg: &ExperimentConfig,
    value: Option<String>,
    trial: usize,
    seed: u64,
    solved: SolvedPoint,
    reference: Option<f64>,
) -> Result<Vec<TrialArtifacts>> {
    let n = ctx.split.train.n();
    let mut out = Vec::new();
    for &method in &cfg.samplers {
        let (selection, samples, subset) = match method.sampler() {
            None => (None, None, (0..n).collect::<Vec<_>>()),
            Some(_) => {
                let samples = solved
                    .samples
                    .iter()
                    .find(|(m, _)| *m == method)
                    .map(|(_, s)| s.clone())
                    .expect("sampled above");
                let mut sel = SelectionResult::from_samples(&samples);
                if sel.selected.is_empty() {
                    return Err(Error::Solver(format!(
                        "{method} selected no access points (trial {trial})"
                    )));
                }
                let reference = reference.expect("model built");
                sel.tts_seconds = anneal::tts(&samples, reference, cfg.target_probability)?;
                let subset = sel.selected.clone();
                (Some(sel), Some(samples), subset)
            }
        };
        let report = if method == Method::AllAps {
            let knn = cfg.localizer.k_neighbors;
            if !ctx.baseline.contains_key(&knn) {
                let r = localize::evaluate(&ctx.split, &subset, &cfg.localizer)?;
                ctx.baseline.insert(knn, r);
            }
            ctx.baseline[&knn].clone()
        } else {
            localize::evaluate(&ctx.split, &subset, &cfg.localizer)?
        };
        let record = TrialRecord {
            value: value.clone(),
            trial,
            seed,
            method,
            achieved_k: subset.len(),
            best_energy: selection.as_ref().map(|s| s.best_energy),
            p_success: samples
                .as_ref()
                .zip(reference)
                .map(|(s, r)| s.success_probability(r)),
            reference_energy: samples.as_ref().and(reference),
            mean_error_m: report.mean_error_m,
            median_error_m: report.median_error_m,
            p95_error_m: report.p95_error_m,
            floor_accuracy: report.floor_accuracy,
            num_aps_used: report.num_aps_used,
            reduction_fraction: report.reduction_fraction,
            total_anneal_seconds: samples.as_ref().map(|s| s.timing.total_anneal_seconds),
            per_read_seconds: samples.as_ref().map(|s| s.timing.per_read_seconds),
            tts_seconds: selection.as_ref().and_then(|s| s.tts_seconds),
        };
        out.push(TrialArtifacts {
            record,
            selection,
            report,
            samples,
        });
    }
    Ok(out)
}

// ---- output ------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub dataset: DatasetSummary,
    /// How the time-to-solution reference energy was chosen.
    pub tts_reference: String,
    /// SHA-256 of every reproducible artifact, keyed by relative path.
    pub artifacts: BTreeMap<String, String>,
    /// Artifacts containing wall-clock measurements.
    pub volatile: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub source: String,
    pub m: usize,
    pub n: usize,
}

/// Loads an experiment config from JSON: either a bare config or a manifest.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let cfg = match value.get("config") {
        Some(inner) if value.get("artifacts").is_some() => serde_json::from_value(inner.clone())?,
        _ => serde_json::from_value(value)?,
    };
    Ok(cfg)
}

/// Writes through a temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const AGGREGATE_COLUMNS: [&str; 16] = [
    "value",
    "method",
    "trials",
    "achieved_k_mean",
    "achieved_k_min",
    "achieved_k_max",
    "k_hit_fraction",
    "reduction_fraction_mean",
    "mean_error_m_mean",
    "mean_error_m_std",
    "median_error_m_mean",
    "p95_error_m_mean",
    "floor_accuracy_mean",
    "floor_accuracy_std",
    "best_energy_mean",
    "p_success_mean",
];

fn aggregate_fields(a: &AggregateRow) -> Vec<String> {
    vec![
        a.value.clone().unwrap_or_default(),
        a.method.to_string(),
        a.trials.to_string(),
        a.achieved_k_mean.to_string(),
        a.achieved_k_min.to_string(),
        a.achieved_k_max.to_string(),
        a.k_hit_fraction.to_string(),
        a.reduction_fraction_mean.to_string(),
        a.mean_error_m_mean.to_string(),
        a.mean_error_m_std.to_string(),
        a.median_error_m_mean.to_string(),
        a.p95_error_m_mean.to_string(),
        a.floor_accuracy_mean.to_string(),
        a.floor_accuracy_std.to_string(),
        fmt_opt(a.best_energy_mean),
        fmt_opt(a.p_success_mean),
    ]
}

/// `aggregate.csv`: deterministic columns only.
pub fn aggregate_csv(rows: &[AggregateRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(AGGREGATE_COLUMNS)?;
    for a in rows {
        w.write_record(aggregate_fields(a))?;
    }
    w.into_inner().map_err(|e| Error::Solver(e.to_string()))
}

/// `sweep.csv`: `parameter` plus the aggregate columns plus mean TTS.
pub fn sweep_csv(parameter: &str, rows: &[AggregateRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["parameter"];
    header.extend(AGGREGATE_COLUMNS);
    header.extend(["tts_mean_seconds", "tts_defined_fraction"]);
    w.write_record(&header)?;
    for a in rows {
        let mut rec = vec![parameter.to_string()];
        rec.extend(aggregate_fields(a));
        rec.push(fmt_opt(a.tts_mean_seconds));
        rec.push(fmt_opt(a.tts_defined_fraction));
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| Error::Solver(e.to_string()))
}

fn timing_csv(artifacts: &[&TrialArtifacts]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "method",
        "trial",
        "total_anneal_seconds",
        "per_read_seconds",
        "tts_seconds",
    ])?;
    for a in artifacts {
        let r = &a.record;
        if r.method.sampler().is_none() {
            continue;
        }
        w.write_record([
            r.method.to_string(),
            r.trial.to_string(),
            fmt_opt(r.total_anneal_seconds),
            fmt_opt(r.per_read_seconds),
            fmt_opt(r.tts_seconds),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Solver(e.to_string()))
}

fn dir_name(parameter: SweepParameter, value: &str) -> String {
    let safe: String = value
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect();
    format!("{}={safe}", parameter.as_str())
}

/// Writes every artifact of `outcome` under `dir` and returns the manifest.
pub fn write_outputs(outcome: &ExperimentOutcome, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut hashed = BTreeMap::new();
    let mut volatile = Vec::new();
    let mut put = |rel: String, bytes: Vec<u8>, reproducible: bool| -> Result<()> {
        let path = dir.join(&rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        write_atomic(&path, &bytes)?;
        if reproducible {
            hashed.insert(rel, sha256_hex(&bytes));
        } else {
            volatile.push(rel);
        }
        Ok(())
    };

    let mut values: Vec<Option<String>> = Vec::new();
    for a in &outcome.artifacts {
        if !values.contains(&a.record.value) {
            values.push(a.record.value.clone());
        }
    }
    for value in &values {
        let prefix = match (value, &outcome.config.sweep) {
            (Some(v), Some(axis)) => format!("{}/", dir_name(axis.parameter, v)),
            _ => String::new(),
        };
        let group: Vec<&TrialArtifacts> = outcome
            .artifacts
            .iter()
            .filter(|a| &a.record.value == value)
            .collect();
        for a in &group {
            let stem = format!("{}_{}", a.record.method, a.record.trial);
            if let Some(sel) = &a.selection {
                // Wall-clock derived fields live in timing.csv.
                let stable = SelectionResult {
                    tts_seconds: None,
                    ..sel.clone()
                };
                put(
                    format!("{prefix}selection_{stem}.json"),
                    serde_json::to_vec_pretty(&stable)?,
                    true,
                )?;
            }
            put(
                format!("{prefix}localization_{stem}.json"),
                serde_json::to_vec(&a.report)?,
                true,
            )?;
            if let Some(s) = &a.samples {
                put(format!("{prefix}samples_{stem}.json"), serde_json::to_vec(s)?, false)?;
            }
        }
        let rows: Vec<AggregateRow> = outcome
            .aggregates
            .iter()
            .filter(|r| &r.value == value)
            .cloned()
            .collect();
        put(format!("{prefix}aggregate.csv"), aggregate_csv(&rows)?, true)?;
        put(format!("{prefix}timing.csv"), timing_csv(&group)?, false)?;
    }
    if let Some(axis) = &outcome.config.sweep {
        put(
            "sweep.csv".into(),
            sweep_csv(axis.parameter.as_str(), &outcome.aggregates)?,
            false,
        )?;
    }

    let source = match &outcome.config.dataset {
        DatasetSource::Csv(paths) => paths
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(","),
        DatasetSource::Synthetic(s) => format!("synthetic(seed={})", s.seed),
    };
    let manifest = Manifest {
        config: outcome.config.clone(),
        seeds: outcome.config.trial_seeds(),
        dataset: DatasetSummary {
            source,
            m: outcome.m,
            n: outcome.n,
        },
        tts_reference: format!(
            "exact optimum when n <= {BRUTE_FORCE_LIMIT}, otherwise best energy reached by any sampler in the same trial"
        ),
        artifacts: hashed,
        volatile,
    };
    write_atomic(&dir.join("manifest.json"), &serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_reference_parameters() {
        let c = ExperimentConfig::default();
        assert_eq!(c.k, 20);
        assert_eq!(c.alpha, 0.8);
        assert_eq!(c.eta, 2.0);
        assert_eq!(c.metric, Metric::Entropy);
        assert_eq!(c.anneal.num_reads, 1000);
        assert_eq!(c.anneal.num_sweeps, 1000);
        assert_eq!(c.anneal.beta, 10.0);
        assert_eq!(c.anneal.gamma, 1.0);
        assert_eq!(c.trials, 10);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn sweep_value_application() {
        let mut c = ExperimentConfig::default();
        c.sweep = Some(SweepAxis {
            parameter: "budget-k".parse().unwrap(),
            values: vec!["5".into(), "40".into()],
        });
        assert_eq!(c.with_value("40").unwrap().k, 40);
        assert!(c.with_value("x").is_err());
        c.sweep.as_mut().unwrap().parameter = SweepParameter::Metric;
        assert_eq!(c.with_value("max").unwrap().metric, Metric::Max);
        assert!("temperature".parse::<SweepParameter>().is_err());
    }

    #[test]
    fn invalid_configs() {
        let base = ExperimentConfig::default();
        assert!(ExperimentConfig { trials: 0, ..base.clone() }.validate().is_err());
        assert!(ExperimentConfig { alpha: 2.0, ..base.clone() }.validate().is_err());
        assert!(ExperimentConfig { samplers: vec![], ..base.clone() }.validate().is_err());
        let mut swept = base.clone();
        swept.sweep = Some(SweepAxis {
            parameter: SweepParameter::Eta,
            values: vec!["-1".into()],
        });
        assert!(swept.validate().is_err());
    }

    #[test]
    fn aggregate_statistics() {
        let rec = |trial, err: f64, floor: f64, k| TrialRecord {
            value: None,
            trial,
            seed: trial as u64,
            method: Method::Sqa,
            achieved_k: k,
            best_energy: Some(-1.0),
            p_success: Some(0.5),
            reference_energy: Some(-1.0),
            mean_error_m: err,
            median_error_m: err,
            p95_error_m: err,
            floor_accuracy: floor,
            num_aps_used: k,
            reduction_fraction: 1.0 - k as f64 / 10.0,
            total_anneal_seconds: Some(1.0),
            per_read_seconds: Some(0.1),
            tts_seconds: if trial == 0 { Some(2.0) } else { None },
        };
        let rows = aggregate(&[rec(0, 1.0, 0.5, 2), rec(1, 3.0, 1.0, 3)], &|_| 2);
        assert_eq!(rows.len(), 1);
        let a = &rows[0];
        assert_eq!(a.mean_error_m_mean, 2.0);
        assert!((a.mean_error_m_std - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(a.floor_accuracy_mean, 0.75);
        assert_eq!((a.achieved_k_min, a.achieved_k_max), (2, 3));
        assert_eq!(a.k_hit_fraction, 0.5);
        assert_eq!(a.tts_mean_seconds, Some(2.0));
        assert_eq!(a.tts_defined_fraction, Some(0.5));
    }

    #[test]
    fn method_names() {
        for m in [Method::Sa, Method::Sqa, Method::Exact, Method::AllAps] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            assert_eq!(
                serde_json::to_string(&m).unwrap(),
                format!("\"{}\"", m.as_str())
            );
        }
    }
}
