//! Samplers for QUBO models and time-to-solution statistics.
//!
//! Both samplers run `num_reads` independent restarts. Read `r` draws from its
//! own ChaCha stream (`seed`, stream `r`), so results do not depend on how
//! reads are spread over threads.

mod kernel;
mod sa;
mod sqa;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubo::{self, QuboModel};

pub use sa::{geometric_schedule, sa_sample};
pub use sqa::{ln_coth, sqa_sample, transverse_field, trotter_coupling};

/// Slack when deciding whether a read reached the reference energy.
pub const SUCCESS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    Sa,
    Sqa,
    Exact,
}

impl Sampler {
    pub fn as_str(self) -> &'static str {
        match self {
            Sampler::Sa => "sa",
            Sampler::Sqa => "sqa",
            Sampler::Exact => "exact",
        }
    }
}

impl fmt::Display for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sa" => Ok(Sampler::Sa),
            "sqa" => Ok(Sampler::Sqa),
            "exact" => Ok(Sampler::Exact),
            _ => Err(Error::invalid(
                "sampler",
                format!("{s:?} is not one of sa, sqa, exact"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealConfig {
    pub num_reads: usize,
    pub num_sweeps: usize,
    /// Final inverse temperature of SA; path-integral temperature of SQA.
    pub beta: f64,
    /// Starting inverse temperature of the SA schedule.
    pub beta_hot: f64,
    /// Initial transverse field (SQA).
    pub gamma: f64,
    pub trotter_slices: usize,
    pub seed: u64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self {
            num_reads: 1000,
            num_sweeps: 1000,
            beta: 10.0,
            beta_hot: 0.1,
            gamma: 1.0,
            trotter_slices: 8,
            seed: 0,
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_reads == 0 {
            return Err(Error::invalid("num_reads", "must be positive"));
        }
        if self.num_sweeps == 0 {
            return Err(Error::invalid("num_sweeps", "must be positive"));
        }
        for (name, v) in [
            ("beta", self.beta),
            ("beta_hot", self.beta_hot),
            ("gamma", self.gamma),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("{v} must be finite and positive")));
            }
        }
        if self.trotter_slices < 2 {
            return Err(Error::invalid(
                "trotter_slices",
                format!("{} must be at least 2", self.trotter_slices),
            ));
        }
        Ok(())
    }

    pub(crate) fn read_rng(&self, read: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(read as u64);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timing {
    pub total_anneal_seconds: f64,
    pub per_read_seconds: f64,
}

impl Timing {
    fn since(start: Instant, reads: usize) -> Self {
        let total = start.elapsed().as_secs_f64();
        Self {
            total_anneal_seconds: total,
            per_read_seconds: total / reads as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    #[serde(with = "bitstring")]
    pub x: Vec<bool>,
    pub energy: f64,
    pub occurrences: usize,
}

mod bitstring {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &[bool], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&crate::qubo::bits_to_string(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
        let s = String::deserialize(d)?;
        crate::qubo::parse_bits(&s).map_err(serde::de::Error::custom)
    }
}

/// Distinct final states of a sampler run, ascending by energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub rows: Vec<SampleRow>,
    pub timing: Timing,
    pub sampler: Sampler,
    pub config: AnnealConfig,
}

impl SampleSet {
    /// Groups identical states, re-scores each with the model and sorts by
    /// energy, then bitstring.
    pub fn from_states(
        model: &QuboModel,
        states: Vec<Vec<bool>>,
        sampler: Sampler,
        config: AnnealConfig,
        timing: Timing,
    ) -> Self {
        let mut counts: HashMap<Vec<bool>, usize> = HashMap::new();
        for s in states {
            *counts.entry(s).or_default() += 1;
        }
        let mut rows: Vec<SampleRow> = counts
            .into_iter()
            .map(|(x, occurrences)| SampleRow {
                energy: model.energy_unchecked(&x),
                x,
                occurrences,
            })
            .collect();
        rows.sort_by(|a, b| a.energy.total_cmp(&b.energy).then_with(|| a.x.cmp(&b.x)));
        Self {
            rows,
            timing,
            sampler,
            config,
        }
    }

    pub fn num_reads(&self) -> usize {
        self.rows.iter().map(|r| r.occurrences).sum()
    }

    pub fn best(&self) -> &SampleRow {
        &self.rows[0]
    }

    /// Fraction of reads at or below `reference_energy` (with a small slack).
    pub fn success_probability(&self, reference_energy: f64) -> f64 {
        let cut = reference_energy + SUCCESS_TOLERANCE;
        let hits: usize = self
            .rows
            .iter()
            .take_while(|r| r.energy <= cut)
            .map(|r| r.occurrences)
            .sum();
        hits as f64 / self.num_reads() as f64
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Time to reach `reference_energy` with probability `target_probability`.
/// `None` when no read succeeded.
pub fn tts(s: &SampleSet, reference_energy: f64, target_probability: f64) -> Result<Option<f64>> {
    if !(target_probability > 0.0 && target_probability < 1.0) {
        return Err(Error::invalid(
            "target_probability",
            format!("{target_probability} is not in (0, 1)"),
        ));
    }
    let p = s.success_probability(reference_energy);
    Ok(tts_from_probability(
        p,
        s.timing.per_read_seconds,
        target_probability,
    ))
}

pub fn tts_from_probability(p_success: f64, per_read_seconds: f64, target: f64) -> Option<f64> {
    if p_success <= 0.0 {
        None
    } else if p_success >= 1.0 {
        Some(per_read_seconds)
    } else {
        Some(per_read_seconds * (1.0 - target).ln() / (1.0 - p_success).ln())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Selected AP indices, ascending.
    pub selected: Vec<usize>,
    pub achieved_k: usize,
    pub best_energy: f64,
    pub sampler: Sampler,
    pub config: AnnealConfig,
    pub tts_seconds: Option<f64>,
}

impl SelectionResult {
    pub fn from_bits(x: &[bool], energy: f64, sampler: Sampler, config: AnnealConfig) -> Self {
        let selected: Vec<usize> = x
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i)
            .collect();
        Self {
            achieved_k: selected.len(),
            selected,
            best_energy: energy,
            sampler,
            config,
            tts_seconds: None,
        }
    }

    /// Takes the lowest-energy row (rows are already ordered with ties by bitstring).
    pub fn from_samples(s: &SampleSet) -> Self {
        let best = s.best();
        Self::from_bits(&best.x, best.energy, s.sampler, s.config)
    }
}

/// Runs `sampler` on `model`. The exact sampler reports its single optimum
/// as occurring in every read.
pub fn sample(model: &QuboModel, sampler: Sampler, cfg: &AnnealConfig) -> Result<SampleSet> {
    cfg.validate()?;
    if model.n() == 0 {
        return Err(Error::Solver("model has no variables".into()));
    }
    match sampler {
        Sampler::Sa => sa_sample(model, cfg),
        Sampler::Sqa => sqa_sample(model, cfg),
        Sampler::Exact => {
            let start = Instant::now();
            let sol = qubo::brute_force(model)?;
            let timing = Timing::since(start, cfg.num_reads);
            Ok(SampleSet::from_states(
                model,
                vec![sol.x; cfg.num_reads],
                Sampler::Exact,
                *cfg,
                timing,
            ))
        }
    }
}

pub fn select(model: &QuboModel, sampler: Sampler, cfg: &AnnealConfig) -> Result<SelectionResult> {
    let samples = sample(model, sampler, cfg)?;
    Ok(SelectionResult::from_samples(&samples))
}

pub(crate) fn timed_reads<F>(cfg: &AnnealConfig, read: F) -> (Vec<Vec<bool>>, Timing)
where
    F: Fn(usize) -> Vec<bool> + Sync + Send,
{
    use rayon::prelude::*;
    let start = Instant::now();
    let states: Vec<Vec<bool>> = (0..cfg.num_reads).into_par_iter().map(read).collect();
    (states, Timing::since(start, cfg.num_reads))
}
