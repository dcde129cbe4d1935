//! `y += a * x` for the local-field updates, the hot loop of both samplers.
//!
//! The AVX2 path uses separate multiply and add (no FMA), so it rounds exactly
//! like the scalar path and samples do not depend on the host CPU.

pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the feature was detected at runtime.
            unsafe { axpy_avx2(y, a, x) };
            return;
        }
    }
    axpy_scalar(y, a, x);
}

#[inline(always)]
fn axpy_scalar(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn axpy_avx2(y: &mut [f64], a: f64, x: &[f64]) {
    axpy_scalar(y, a, x);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_scalar_bitwise() {
        let x: Vec<f64> = (0..37).map(|i| (i as f64 * 0.37).sin() / 3.0).collect();
        let mut a: Vec<f64> = (0..37).map(|i| i as f64 * 1e-3 - 0.01).collect();
        let mut b = a.clone();
        for s in [2.0, -2.0, 0.3, -1.7] {
            axpy(&mut a, s, &x);
            axpy_scalar(&mut b, s, &x);
        }
        assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}
