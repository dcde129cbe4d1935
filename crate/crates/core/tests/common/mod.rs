#![allow(dead_code)]

use apsel_core::analysis::{ImportanceVector, Metric, RedundancyMatrix};
use apsel_core::dataset::FingerprintDataset;
use apsel_core::qubo::{self, QuboModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ND: f64 = -105.0;

/// Random importance scores and a symmetric |correlation|-like matrix.
pub fn random_scores(n: usize, rng: &mut impl Rng) -> (ImportanceVector, RedundancyMatrix) {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
    let imp = ImportanceVector::from_raw(Metric::Entropy, raw, Some(vec![true; n]));
    let mut r = vec![0.0; n * n];
    for i in 0..n {
        r[i * n + i] = 1.0;
        for j in i + 1..n {
            let v = rng.random_range(0.0..1.0);
            r[i * n + j] = v;
            r[j * n + i] = v;
        }
    }
    let red = RedundancyMatrix::from_dense(n, r, vec![true; n]).unwrap();
    (imp, red)
}

pub struct Instance {
    pub imp: ImportanceVector,
    pub red: RedundancyMatrix,
    pub alpha: f64,
    pub eta: f64,
    pub k: usize,
    pub model: QuboModel,
}

pub fn random_instance(n: usize, seed: u64, alphas: &[f64], etas: &[f64]) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (imp, red) = random_scores(n, &mut rng);
    let alpha = alphas[rng.random_range(0..alphas.len())];
    let eta = etas[rng.random_range(0..etas.len())];
    let k = rng.random_range(1..=n);
    let model = qubo::build(&imp, &red, alpha, eta, k).unwrap();
    Instance { imp, red, alpha, eta, k, model }
}

/// The selection objective written out term by term.
pub fn direct_objective(inst: &Instance, x: &[bool]) -> f64 {
    let n = x.len();
    let active = inst.red.active();
    let mut importance = 0.0;
    let mut redundancy = 0.0;
    for i in 0..n {
        if !x[i] {
            continue;
        }
        if active[i] {
            importance += inst.imp.scores[i];
        }
        for j in i + 1..n {
            if x[j] {
                redundancy += inst.red.get(i, j);
            }
        }
    }
    let ones = x.iter().filter(|&&b| b).count() as f64;
    let penalty = ones - inst.k as f64;
    -inst.alpha * importance + (1.0 - inst.alpha) * redundancy + inst.eta * penalty * penalty
}

pub fn bits(mask: u64, n: usize) -> Vec<bool> {
    (0..n).map(|i| mask >> i & 1 == 1).collect()
}

/// Small integer-RSS dataset with a couple of floors.
pub fn toy_dataset(m: usize, n: usize, seed: u64) -> FingerprintDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rss: Vec<f64> = (0..m * n)
        .map(|_| {
            if rng.random_bool(0.3) {
                ND
            } else {
                -(rng.random_range(30..100) as f64)
            }
        })
        .collect();
    let lat = (0..m).map(|_| rng.random_range(0.0..50.0)).collect();
    let lon = (0..m).map(|_| rng.random_range(0.0..80.0)).collect();
    let floor = (0..m).map(|i| (i % 3) as u32).collect();
    let ids = (1..=n).map(|i| format!("WAP{i:03}")).collect();
    FingerprintDataset::new(rss, ids, lat, lon, floor, ND).unwrap()
}
