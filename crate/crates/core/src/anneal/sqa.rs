//! Simulated quantum annealing by path-integral Monte Carlo.
//!
//! The transverse-field Ising model is mapped onto `P` classical replicas
//! (Trotter slices) of the spin system. Each slice sees the problem energy
//! scaled by `1/P`; corresponding spins in neighbouring slices (periodic in
//! imaginary time) couple ferromagnetically with
//! `J_perp = ln(coth(beta * Gamma / P)) / (2 beta)`. Gamma decays linearly
//! over the sweeps, which strengthens `J_perp` until the replicas lock
//! together into one classical state.

use rand::Rng;

use super::kernel::axpy;
use super::sa::metropolis;
use super::{timed_reads, AnnealConfig, SampleSet, Sampler};
use crate::error::Result;
use crate::qubo::QuboModel;

/// Final transverse field, relative to the initial one.
pub const FINAL_FIELD_RATIO: f64 = 0.01;

/// `ln(coth(x))` for `x > 0`, accurate at both ends of the range.
pub fn ln_coth(x: f64) -> f64 {
    // coth(x) = 1 + 2 / (e^{2x} - 1)
    (2.0 / (2.0 * x).exp_m1()).ln_1p()
}

pub fn trotter_coupling(beta: f64, gamma: f64, slices: usize) -> f64 {
    ln_coth(beta * gamma / slices as f64) / (2.0 * beta)
}

/// Transverse field at `sweep` of `num_sweeps`: linear from `gamma` to `0.01 gamma`.
pub fn transverse_field(gamma: f64, sweep: usize, num_sweeps: usize) -> f64 {
    if num_sweeps <= 1 {
        return gamma;
    }
    let t = sweep as f64 / (num_sweeps - 1) as f64;
    gamma * (1.0 - (1.0 - FINAL_FIELD_RATIO) * t)
}

pub fn sqa_sample(model: &QuboModel, cfg: &AnnealConfig) -> Result<SampleSet> {
    cfg.validate()?;
    let ising = model.to_ising();
    let n = ising.n();
    let h = &ising.h;
    let couplings = ising.dense_couplings();
    let p = cfg.trotter_slices;
    let pf = p as f64;
    let beta = cfg.beta;
    let j_perp: Vec<f64> = (0..cfg.num_sweeps)
        .map(|t| trotter_coupling(beta, transverse_field(cfg.gamma, t, cfg.num_sweeps), p))
        .collect();

    let (states, timing) = timed_reads(cfg, |read| {
        let mut rng = cfg.read_rng(read);
        let mut spins: Vec<f64> = (0..p * n)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        // field[k*n + i] = h_i + sum_j J_ij s_j^k
        let mut field = vec![0.0; p * n];
        for k in 0..p {
            let (s, f) = (&spins[k * n..(k + 1) * n], &mut field[k * n..(k + 1) * n]);
            f.copy_from_slice(h);
            for (j, &sj) in s.iter().enumerate() {
                for (fi, &c) in f.iter_mut().zip(&couplings[j * n..(j + 1) * n]) {
                    *fi += c * sj;
                }
            }
        }
        for &jp in &j_perp {
            for k in 0..p {
                let prev = (k + p - 1) % p * n;
                let next = (k + 1) % p * n;
                let base = k * n;
                for i in 0..n {
                    let s = spins[base + i];
                    let neighbours = spins[prev + i] + spins[next + i];
                    let delta = -2.0 * s * field[base + i] / pf + 2.0 * jp * s * neighbours;
                    if metropolis(beta * delta, &mut rng) {
                        spins[base + i] = -s;
                        let step = -2.0 * s;
                        axpy(&mut field[base..base + n], step, &couplings[i * n..(i + 1) * n]);
                    }
                }
            }
        }
        // Read out the slice with the lowest problem energy (first on ties).
        let slice_energy = |k: usize| -> f64 {
            let s = &spins[k * n..(k + 1) * n];
            let f = &field[k * n..(k + 1) * n];
            s.iter()
                .zip(f)
                .zip(h)
                .map(|((&si, &fi), &hi)| si * (hi + fi))
                .sum::<f64>()
                / 2.0
        };
        let best = (0..p)
            .map(|k| (k, slice_energy(k)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(k, _)| k)
            .unwrap_or(0);
        spins[best * n..(best + 1) * n]
            .iter()
            .map(|&s| s > 0.0)
            .collect()
    });
    Ok(SampleSet::from_states(model, states, Sampler::Sqa, *cfg, timing))
}
