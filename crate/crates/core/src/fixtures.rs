//! Reference profiles used by the test suites, the CLI defaults and the
//! acceptance runs.

use crate::error::Result;
use crate::spectral::{PairPotential, SpectralProfile};

/// Number of mollification passes in [`mollified_test_profile`].
pub const MOLLIFICATION_PASSES: usize = 6;

/// A bump on `[0, K0/7]` mollified six times with width `K0/7`, normalized
/// to `phi_hat(0) = 1`. Smooth, nonnegative, supported exactly in `[0, K0)`,
/// with a real-space potential that decays far faster than a single pass.
pub fn mollified_test_profile(dimension: usize, k0: f64) -> Result<SpectralProfile> {
    let eps = k0 / (MOLLIFICATION_PASSES + 1) as f64;
    let mut p = SpectralProfile::bump(dimension, eps, 1.0)?;
    for pass in 1..=MOLLIFICATION_PASSES {
        p = SpectralProfile::build_mollified(&p, eps, eps * (pass + 1) as f64)?;
    }
    let norm = p.phi_hat_at_zero();
    p.scaled(1.0 / norm)
}

pub fn mollified_test_potential(dimension: usize, k0: f64) -> Result<PairPotential> {
    Ok(PairPotential::new(mollified_test_profile(dimension, k0)?))
}

/// The three-dimensional long-range example, strictly positive on `[0, K0)`.
pub fn longrange_potential(k0: f64) -> Result<PairPotential> {
    Ok(PairPotential::new(SpectralProfile::longrange_example(k0)?))
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `(k - s K0)^2 (k - K0)^2` on `[s K0, K0]` and zero below: a profile whose
/// weight sits just inside the cutoff, where competing lattices differ.
pub fn shell_profile(dimension: usize, k0: f64, inner: f64) -> Result<SpectralProfile> {
    let lo = inner * k0;
    let left = poly_mul(&[-lo, 1.0], &[-lo, 1.0]);
    let right = poly_mul(&[-k0, 1.0], &[-k0, 1.0]);
    SpectralProfile::piecewise(dimension, vec![0.0, lo, k0], vec![vec![0.0], poly_mul(&left, &right)])
}

pub fn shell_potential(dimension: usize, k0: f64, inner: f64) -> Result<PairPotential> {
    Ok(PairPotential::new(shell_profile(dimension, k0, inner)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn mollified_fixture_is_normalized_and_supported() {
        let k0 = 2.0 * PI;
        for d in 1..=3 {
            let p = mollified_test_profile(d, k0).unwrap();
            assert!((p.phi_hat_at_zero() - 1.0).abs() < 1e-12);
            assert!(p.eval_phi_hat(0.999 * k0) >= 0.0);
            assert_eq!(p.eval_phi_hat(k0), 0.0);
            assert!(p.eval_phi_hat(0.5 * k0) > 0.0);
        }
    }

    #[test]
    fn shell_profile_matches_its_polynomial() {
        let k0 = 2.0 * PI;
        let p = shell_profile(3, k0, 0.85).unwrap();
        let k = 0.93 * k0;
        let oracle = (k - 0.85 * k0).powi(2) * (k - k0).powi(2);
        assert!((p.eval_phi_hat(k) - oracle).abs() < 1e-9 * oracle);
        assert_eq!(p.eval_phi_hat(0.5 * k0), 0.0);
    }
}
