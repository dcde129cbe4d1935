//! The budget-constrained AP-selection QUBO.
//!
//! For a selection vector `x` the objective is
//!
//! ```text
//! Q(x) = -alpha * sum_i I_i x_i
//!        + (1 - alpha) * sum_{i<j} R_ij x_i x_j
//!        + eta * (sum_i x_i - k)^2
//! ```
//!
//! With `x_i^2 = x_i` the penalty folds into the linear, pairwise and constant
//! terms, so the model is an ordinary QUBO any sampler can consume.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{ImportanceVector, Metric, RedundancyMatrix};
use crate::error::{Error, Result};

/// Largest model [`brute_force`] will enumerate.
pub const BRUTE_FORCE_LIMIT: usize = 24;
/// Largest model for which [`brute_force`] also returns the full spectrum.
pub const SPECTRUM_LIMIT: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuboParams {
    pub alpha: f64,
    pub eta: f64,
    pub k: usize,
    pub metric: Metric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuboModel {
    linear: Vec<f64>,
    quadratic: BTreeMap<(usize, usize), f64>,
    offset: f64,
    params: Option<QuboParams>,
}

impl QuboModel {
    pub fn new(
        linear: Vec<f64>,
        quadratic: BTreeMap<(usize, usize), f64>,
        offset: f64,
    ) -> Result<Self> {
        let n = linear.len();
        if let Some(&(i, j)) = quadratic.keys().find(|&&(i, j)| !(i < j && j < n)) {
            return Err(Error::invalid(
                "quadratic",
                format!("key ({i}, {j}) must satisfy i < j < {n}"),
            ));
        }
        Ok(Self {
            linear,
            quadratic,
            offset,
            params: None,
        })
    }

    pub fn n(&self) -> usize {
        self.linear.len()
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn quadratic(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.quadratic
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn params(&self) -> Option<&QuboParams> {
        self.params.as_ref()
    }

    pub fn energy(&self, x: &[bool]) -> Result<f64> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: x.len(),
            });
        }
        Ok(self.energy_unchecked(x))
    }

    pub(crate) fn energy_unchecked(&self, x: &[bool]) -> f64 {
        let lin: f64 = self
            .linear
            .iter()
            .zip(x)
            .filter(|(_, &b)| b)
            .map(|(v, _)| v)
            .sum();
        let ones: Vec<usize> = (0..x.len()).filter(|&i| x[i]).collect();
        // Both branches add the same terms in the same (i, j) order.
        let quad: f64 = if ones.len() * ones.len() / 2 < self.quadratic.len() {
            let mut acc = 0.0;
            for (a, &i) in ones.iter().enumerate() {
                for &j in &ones[a + 1..] {
                    if let Some(v) = self.quadratic.get(&(i, j)) {
                        acc += v;
                    }
                }
            }
            acc
        } else {
            self.quadratic
                .iter()
                .filter(|(&(i, j), _)| x[i] && x[j])
                .map(|(_, v)| v)
                .fold(0.0, |acc, v| acc + v)
        };
        lin + quad + self.offset
    }

    /// Symmetric row-major `n x n` coupling matrix with a zero diagonal.
    pub fn dense_quadratic(&self) -> Vec<f64> {
        let n = self.n();
        let mut q = vec![0.0; n * n];
        for (&(i, j), &v) in &self.quadratic {
            q[i * n + j] = v;
            q[j * n + i] = v;
        }
        q
    }

    /// Spin form under `x_i = (s_i + 1) / 2`.
    pub fn to_ising(&self) -> IsingModel {
        let mut h: Vec<f64> = self.linear.iter().map(|a| a / 2.0).collect();
        let mut offset = self.offset + self.linear.iter().sum::<f64>() / 2.0;
        let mut couplings = BTreeMap::new();
        for (&(i, j), &q) in &self.quadratic {
            let quarter = q / 4.0;
            couplings.insert((i, j), quarter);
            h[i] += quarter;
            h[j] += quarter;
            offset += quarter;
        }
        IsingModel {
            h,
            couplings,
            offset,
        }
    }

    pub fn to_document(&self) -> QuboDocument {
        QuboDocument {
            n: self.n(),
            linear: self.linear.clone(),
            quadratic: self
                .quadratic
                .iter()
                .map(|(&(i, j), &v)| QuadraticEntry { i, j, v })
                .collect(),
            offset: self.offset,
            params: self.params,
        }
    }

    pub fn from_document(doc: QuboDocument) -> Result<Self> {
        if doc.linear.len() != doc.n {
            return Err(Error::DimensionMismatch {
                expected: doc.n,
                got: doc.linear.len(),
            });
        }
        let mut quadratic = BTreeMap::new();
        for e in doc.quadratic {
            if quadratic.insert((e.i, e.j), e.v).is_some() {
                return Err(Error::invalid(
                    "quadratic",
                    format!("duplicate entry ({}, {})", e.i, e.j),
                ));
            }
        }
        let mut model = Self::new(doc.linear, quadratic, doc.offset)?;
        model.params = doc.params;
        Ok(model)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, &self.to_document())?;
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_document(serde_json::from_reader(BufReader::new(file))?)
    }
}

/// Serialized model: `{n, linear[], quadratic[{i, j, v}], offset, params{}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuboDocument {
    pub n: usize,
    pub linear: Vec<f64>,
    pub quadratic: Vec<QuadraticEntry>,
    pub offset: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<QuboParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticEntry {
    pub i: usize,
    pub j: usize,
    pub v: f64,
}

/// `E(s) = sum_i h_i s_i + sum_{i<j} J_ij s_i s_j + offset` over spins in {-1, +1}.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    pub h: Vec<f64>,
    pub couplings: BTreeMap<(usize, usize), f64>,
    pub offset: f64,
}

impl IsingModel {
    pub fn n(&self) -> usize {
        self.h.len()
    }

    pub fn energy(&self, spins: &[i8]) -> Result<f64> {
        if spins.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: spins.len(),
            });
        }
        let field: f64 = self.h.iter().zip(spins).map(|(h, &s)| h * s as f64).sum();
        let pair: f64 = self
            .couplings
            .iter()
            .map(|(&(i, j), v)| v * (spins[i] * spins[j]) as f64)
            .sum();
        Ok(field + pair + self.offset)
    }

    pub fn dense_couplings(&self) -> Vec<f64> {
        let n = self.n();
        let mut j = vec![0.0; n * n];
        for (&(a, b), &v) in &self.couplings {
            j[a * n + b] = v;
            j[b * n + a] = v;
        }
        j
    }
}

pub fn spins_from_bits(x: &[bool]) -> Vec<i8> {
    x.iter().map(|&b| if b { 1 } else { -1 }).collect()
}

pub fn bits_to_string(x: &[bool]) -> String {
    x.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn parse_bits(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::invalid("x", format!("bitstring {s:?} contains {c:?}"))),
        })
        .collect()
}

/// Assembles the model from importance and redundancy. APs outside the active
/// mask get the penalty's linear term only, with no importance reward.
pub fn build(
    imp: &ImportanceVector,
    red: &RedundancyMatrix,
    alpha: f64,
    eta: f64,
    k: usize,
) -> Result<QuboModel> {
    let n = imp.len();
    if red.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: red.n(),
        });
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid("alpha", format!("{alpha} is not in [0, 1]")));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::invalid("eta", format!("{eta} must be positive")));
    }
    if k < 1 || k > n {
        return Err(Error::invalid("k", format!("{k} is not in [1, {n}]")));
    }
    let kf = k as f64;
    let penalty_linear = eta * (1.0 - 2.0 * kf);
    let linear = (0..n)
        .map(|i| {
            if red.active()[i] {
                -alpha * imp.scores[i] + penalty_linear
            } else {
                penalty_linear
            }
        })
        .collect();
    let mut quadratic = BTreeMap::new();
    for i in 0..n {
        for j in i + 1..n {
            quadratic.insert((i, j), (1.0 - alpha) * red.get(i, j) + 2.0 * eta);
        }
    }
    let mut model = QuboModel::new(linear, quadratic, eta * kf * kf)?;
    model.params = Some(QuboParams {
        alpha,
        eta,
        k,
        metric: imp.metric,
    });
    Ok(model)
}

/// Global minimizer found by enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    pub x: Vec<bool>,
    pub energy: f64,
    /// Every state with its energy, ascending (ties by bitstring), when `n <= 16`.
    pub spectrum: Option<Vec<(Vec<bool>, f64)>>,
}

fn mask_bits(mask: u32, n: usize) -> Vec<bool> {
    (0..n).map(|i| mask >> i & 1 == 1).collect()
}

/// Enumerates all `2^n` states. Ties are broken toward the lexicographically
/// smallest bitstring (`x_0` first).
pub fn brute_force(model: &QuboModel) -> Result<ExactSolution> {
    let n = model.n();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    if n <= SPECTRUM_LIMIT {
        let mut spectrum: Vec<(Vec<bool>, f64)> = (0u32..1 << n)
            .map(|mask| {
                let x = mask_bits(mask, n);
                let e = model.energy_unchecked(&x);
                (x, e)
            })
            .collect();
        spectrum.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        let (x, energy) = spectrum[0].clone();
        return Ok(ExactSolution {
            x,
            energy,
            spectrum: Some(spectrum),
        });
    }

    // Gray-code walk with incremental local fields; candidates near the running
    // minimum are re-scored exactly afterwards.
    let q = model.dense_quadratic();
    let lin = model.linear();
    let mut field = lin.to_vec();
    let mut x = vec![false; n];
    let mut mask = 0u32;
    let mut e = model.offset();
    let scale = lin.iter().map(|v| v.abs()).sum::<f64>()
        + model.quadratic().values().map(|v| v.abs()).sum::<f64>()
        + model.offset().abs();
    let slack = 1e-9 * scale.max(1.0);
    let mut best = e;
    let mut candidates = vec![0u32];
    for t in 1u32..1 << n {
        let i = t.trailing_zeros() as usize;
        let delta = if x[i] { -field[i] } else { field[i] };
        e += delta;
        let sign = if x[i] { -1.0 } else { 1.0 };
        x[i] = !x[i];
        mask ^= 1 << i;
        let row = &q[i * n..(i + 1) * n];
        for (f, &c) in field.iter_mut().zip(row) {
            *f += sign * c;
        }
        if e < best - slack {
            best = e;
            candidates.retain(|_| false);
            candidates.push(mask);
        } else if e <= best + slack {
            best = best.min(e);
            candidates.push(mask);
        }
    }
    let (x, energy) = candidates
        .into_iter()
        .map(|m| {
            let x = mask_bits(m, n);
            let e = model.energy_unchecked(&x);
            (x, e)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)))
        .expect("at least one state");
    Ok(ExactSolution {
        x,
        energy,
        spectrum: None,
    })
}
