//! Classical simulated annealing with single-bit Metropolis flips.

use rand::Rng;

use super::kernel::axpy;
use super::{timed_reads, AnnealConfig, SampleSet, Sampler};
use crate::error::Result;
use crate::qubo::QuboModel;

/// Acceptance probabilities below `exp(-MAX_EXPONENT)` are treated as zero.
pub(crate) const MAX_EXPONENT: f64 = 40.0;

/// `steps` inverse temperatures from `beta_start` to `beta_end`, evenly spaced in log.
/// Metropolis test for an energy increase scaled by inverse temperature.
///
/// Decides exactly as `u < exp(-t)`, but skips the `exp` when `u` falls
/// outside `[1 - t, 1 / (1 + t + t^2/2)]`, which brackets `exp(-t)`.
#[inline(always)]
pub(crate) fn metropolis<R: Rng>(t: f64, rng: &mut R) -> bool {
    if t <= 0.0 {
        return true;
    }
    if t >= MAX_EXPONENT {
        return false;
    }
    let u = rng.random::<f64>();
    if u * (1.0 + t + 0.5 * t * t) >= 1.0 + 1e-12 {
        false
    } else if u < 1.0 - t - 1e-12 {
        true
    } else {
        u < (-t).exp()
    }
}

pub fn geometric_schedule(beta_start: f64, beta_end: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![beta_end],
        _ => {
            let (a, b) = (beta_start.ln(), beta_end.ln());
            let step = (b - a) / (steps - 1) as f64;
            (0..steps)
                .map(|i| {
                    if i == steps - 1 {
                        beta_end
                    } else {
                        (a + step * i as f64).exp()
                    }
                })
                .collect()
        }
    }
}

pub fn sa_sample(model: &QuboModel, cfg: &AnnealConfig) -> Result<SampleSet> {
    cfg.validate()?;
    let n = model.n();
    let q = model.dense_quadratic();
    let lin = model.linear();
    let betas = geometric_schedule(cfg.beta_hot, cfg.beta, cfg.num_sweeps);
    let (states, timing) = timed_reads(cfg, |read| {
        let mut rng = cfg.read_rng(read);
        let mut x: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
        // field[i] = lin[i] + sum_j q[i][j] x[j]: the energy change of raising x[i].
        let mut field = lin.to_vec();
        for (j, _) in x.iter().enumerate().filter(|(_, &b)| b) {
            for (f, &c) in field.iter_mut().zip(&q[j * n..(j + 1) * n]) {
                *f += c;
            }
        }
        for &beta in &betas {
            for i in 0..n {
                let delta = if x[i] { -field[i] } else { field[i] };
                if metropolis(beta * delta, &mut rng) {
                    let sign = if x[i] { -1.0 } else { 1.0 };
                    x[i] = !x[i];
                    axpy(&mut field, sign, &q[i * n..(i + 1) * n]);
                }
            }
        }
        x
    });
    Ok(SampleSet::from_states(model, states, Sampler::Sa, *cfg, timing))
}
