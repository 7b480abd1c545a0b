//! Band-limited spectral profiles.
//!
//! A [`SpectralProfile`] is a radial, nonnegative function `phi_hat(k)` that
//! vanishes identically for `k >= cutoff`. It is the single source of truth
//! for an interaction; the real-space potential is derived from it in
//! [`potential`].

mod mollify;
pub mod potential;
mod spec;

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{gauss_legendre, NeumaierSum, UniformPchip};

pub use mollify::{mollifier, MOLLIFIED_GRID_POINTS};
pub use potential::{PairPotential, RadialTable};
pub use spec::{KindSpec, ProfileSpec};

/// Number of samples used when checking nonnegativity and constraints.
pub const VALIDATION_GRID_POINTS: usize = 4096;

/// Relative tolerance on `f(K0)` and `f'(K0)` for long-range polynomial profiles.
pub const ENDPOINT_TOLERANCE: f64 = 1e-10;

/// How the profile is represented on `[0, cutoff)`.
#[derive(Debug, Clone)]
pub enum ProfileKind {
    /// `sum_i coeffs[i] * k^i`.
    Polynomial { coeffs: Vec<f64> },
    /// Polynomial pieces on `[knots[i], knots[i+1])`, each in powers of `k`.
    Piecewise { knots: Vec<f64>, pieces: Vec<Vec<f64>> },
    /// `amplitude * exp(-1 / (1 - k^2 / cutoff^2))`.
    Bump { amplitude: f64 },
    /// Radial convolution of `base` with the mollifier of width `epsilon`,
    /// stored on a uniform grid.
    Mollified {
        epsilon: f64,
        base: Box<SpectralProfile>,
        table: UniformPchip,
    },
    /// Samples on a uniform grid over `[0, cutoff]`.
    Tabulated { table: UniformPchip },
}

/// A radial, nonnegative, compactly supported spectral profile.
#[derive(Debug, Clone)]
pub struct SpectralProfile {
    dimension: usize,
    cutoff: f64,
    kind: ProfileKind,
    phi_hat_at_zero: f64,
}

fn check_dimension(d: usize) -> Result<()> {
    if (1..=3).contains(&d) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("dimension must be 1, 2 or 3, got {d}")))
    }
}

fn check_cutoff(k0: f64) -> Result<()> {
    if k0.is_finite() && k0 > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("cutoff must be positive and finite, got {k0}")))
    }
}

/// Evaluate a polynomial given in ascending powers.
#[inline]
pub fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Coefficients of the derivative of a polynomial in ascending powers.
pub fn derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| i as f64 * c)
        .collect()
}

/// Expand `scale * prod_j (k - roots[j])` into real ascending coefficients.
/// Complex roots must come in conjugate pairs.
pub fn expand_roots(scale: f64, roots: &[Complex64]) -> Result<Vec<f64>> {
    let mut poly = vec![Complex64::new(scale, 0.0)];
    for root in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (i, c) in poly.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= c * root;
        }
        poly = next;
    }
    let magnitude = poly.iter().map(|c| c.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if poly.iter().any(|c| c.im.abs() > 1e-12 * magnitude) {
        return Err(Error::InvalidProfile(
            "complex roots must come in conjugate pairs".into(),
        ));
    }
    Ok(poly.into_iter().map(|c| c.re).collect())
}

impl SpectralProfile {
    fn finish(dimension: usize, cutoff: f64, kind: ProfileKind) -> Result<SpectralProfile> {
        let mut profile = SpectralProfile {
            dimension,
            cutoff,
            kind,
            phi_hat_at_zero: 0.0,
        };
        profile.phi_hat_at_zero = profile.eval_phi_hat(0.0);
        profile.check_nonnegative()?;
        Ok(profile)
    }

    /// Polynomial profile `sum_i coeffs[i] k^i` on `[0, cutoff)`.
    pub fn polynomial(dimension: usize, cutoff: f64, coeffs: Vec<f64>) -> Result<SpectralProfile> {
        check_dimension(dimension)?;
        check_cutoff(cutoff)?;
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidProfile("non-finite polynomial coefficient".into()));
        }
        Self::finish(dimension, cutoff, ProfileKind::Polynomial { coeffs })
    }

    /// The one-dimensional triangle `K0 - |k|`.
    pub fn triangle_1d(cutoff: f64) -> Result<SpectralProfile> {
        Self::polynomial(1, cutoff, vec![cutoff, -1.0])
    }

    /// Piecewise polynomial profile. `knots` must start at 0 and end at the cutoff.
    pub fn piecewise(
        dimension: usize,
        knots: Vec<f64>,
        pieces: Vec<Vec<f64>>,
    ) -> Result<SpectralProfile> {
        check_dimension(dimension)?;
        if knots.len() < 2 || pieces.len() + 1 != knots.len() {
            return Err(Error::InvalidProfile(
                "piecewise profile needs n+1 knots for n pieces".into(),
            ));
        }
        if knots[0] != 0.0 || knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidProfile(
                "knots must start at 0 and increase strictly".into(),
            ));
        }
        let cutoff = *knots.last().unwrap();
        check_cutoff(cutoff)?;
        Self::finish(dimension, cutoff, ProfileKind::Piecewise { knots, pieces })
    }

    /// Scaled mollifier `amplitude * exp(-1/(1 - k^2/K0^2))`.
    pub fn bump(dimension: usize, cutoff: f64, amplitude: f64) -> Result<SpectralProfile> {
        check_dimension(dimension)?;
        check_cutoff(cutoff)?;
        if !(amplitude >= 0.0) || !amplitude.is_finite() {
            return Err(Error::InvalidProfile(format!("bump amplitude must be >= 0, got {amplitude}")));
        }
        Self::finish(dimension, cutoff, ProfileKind::Bump { amplitude })
    }

    /// Samples `values[i]` at `k_i = i * cutoff / (n - 1)`.
    pub fn tabulated(dimension: usize, cutoff: f64, values: Vec<f64>) -> Result<SpectralProfile> {
        check_dimension(dimension)?;
        check_cutoff(cutoff)?;
        if values.len() < 2 {
            return Err(Error::InvalidProfile("need at least two tabulated samples".into()));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidProfile(format!("tabulated sample {v} is negative or not finite")));
        }
        let step = cutoff / (values.len() - 1) as f64;
        let table = UniformPchip::new(step, values, false);
        Self::finish(dimension, cutoff, ProfileKind::Tabulated { table })
    }

    /// Three-dimensional long-range profile `phi_hat(k) = f(k)` with a
    /// polynomial `f` that must satisfy `f(K0) = f'(K0) = 0` and `f >= 0`.
    pub fn build_longrange_3d(coeffs: Vec<f64>, cutoff: f64) -> Result<SpectralProfile> {
        check_cutoff(cutoff)?;
        let scale = coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c.abs() * cutoff.powi(i as i32))
            .fold(0.0, f64::max);
        let value = horner(&coeffs, cutoff);
        let slope = horner(&derivative(&coeffs), cutoff) * cutoff;
        if value.abs() > ENDPOINT_TOLERANCE * scale {
            return Err(Error::ConstraintViolation(format!("f(K0) = {value:e} is not zero")));
        }
        if slope.abs() > ENDPOINT_TOLERANCE * scale {
            return Err(Error::ConstraintViolation(format!(
                "f'(K0) = {:e} is not zero",
                slope / cutoff
            )));
        }
        Self::polynomial(3, cutoff, coeffs)
    }

    /// Long-range profile `scale * prod (k - root)` for conjugate-paired roots.
    pub fn longrange_from_roots(
        scale: f64,
        roots: &[Complex64],
        cutoff: f64,
    ) -> Result<SpectralProfile> {
        Self::build_longrange_3d(expand_roots(scale, roots)?, cutoff)
    }

    /// The worked three-dimensional example
    /// `f(k) = pi^2 (k + z)(k + conj z)(k - K0)^2` with `z = (K0/10)(1 + 3i)`.
    pub fn longrange_example(cutoff: f64) -> Result<SpectralProfile> {
        let z = Complex64::new(cutoff / 10.0, 3.0 * cutoff / 10.0);
        let k0 = Complex64::new(cutoff, 0.0);
        Self::longrange_from_roots(PI * PI, &[-z, -z.conj(), k0, k0], cutoff)
    }

    /// Mollify `base` (supported on `[0, cutoff - epsilon]`) with the bump of width `epsilon`.
    pub fn build_mollified(base: &SpectralProfile, epsilon: f64, cutoff: f64) -> Result<SpectralProfile> {
        mollify::build(base, epsilon, cutoff)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    pub fn phi_hat_at_zero(&self) -> f64 {
        self.phi_hat_at_zero
    }

    /// Polynomial coefficients when the profile is a single polynomial.
    pub fn polynomial_coeffs(&self) -> Option<&[f64]> {
        match &self.kind {
            ProfileKind::Polynomial { coeffs } => Some(coeffs),
            _ => None,
        }
    }

    /// Multiply the profile by a nonnegative constant.
    pub fn scaled(&self, factor: f64) -> Result<SpectralProfile> {
        if !(factor >= 0.0) || !factor.is_finite() {
            return Err(Error::InvalidParameter(format!("scale factor must be >= 0, got {factor}")));
        }
        let kind = match &self.kind {
            ProfileKind::Polynomial { coeffs } => ProfileKind::Polynomial {
                coeffs: coeffs.iter().map(|c| c * factor).collect(),
            },
            ProfileKind::Piecewise { knots, pieces } => ProfileKind::Piecewise {
                knots: knots.clone(),
                pieces: pieces
                    .iter()
                    .map(|p| p.iter().map(|c| c * factor).collect())
                    .collect(),
            },
            ProfileKind::Bump { amplitude } => ProfileKind::Bump {
                amplitude: amplitude * factor,
            },
            ProfileKind::Mollified { epsilon, base, table } => ProfileKind::Mollified {
                epsilon: *epsilon,
                base: Box::new(base.scaled(factor)?),
                table: UniformPchip::new(
                    table.step(),
                    table.values().iter().map(|v| v * factor).collect(),
                    true,
                ),
            },
            ProfileKind::Tabulated { table } => {
                let values: Vec<f64> = table.values().iter().map(|v| v * factor).collect();
                return Self::tabulated(self.dimension, self.cutoff, values);
            }
        };
        Self::finish(self.dimension, self.cutoff, kind)
    }

    /// `phi_hat(k)`; exactly zero for `k >= cutoff`.
    #[inline]
    pub fn eval_phi_hat(&self, k: f64) -> f64 {
        let k = k.abs();
        if k >= self.cutoff {
            return 0.0;
        }
        match &self.kind {
            ProfileKind::Polynomial { coeffs } => horner(coeffs, k),
            ProfileKind::Piecewise { knots, pieces } => {
                let idx = match knots.binary_search_by(|x| x.partial_cmp(&k).unwrap()) {
                    Ok(i) => i,
                    Err(i) => i - 1,
                };
                horner(&pieces[idx.min(pieces.len() - 1)], k)
            }
            ProfileKind::Bump { amplitude } => amplitude * mollifier(k, self.cutoff),
            ProfileKind::Mollified { table, .. } | ProfileKind::Tabulated { table } => table.eval(k),
        }
    }

    /// Points where the representation may lose smoothness; quadratures split there.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            ProfileKind::Polynomial { .. } | ProfileKind::Bump { .. } => vec![0.0, self.cutoff],
            ProfileKind::Piecewise { knots, .. } => knots.clone(),
            ProfileKind::Mollified { table, .. } | ProfileKind::Tabulated { table } => {
                let n = table.values().len();
                (0..n).map(|i| i as f64 * table.step()).collect()
            }
        }
    }

    /// Whether the representation is a dense table (one quadrature cell per sample).
    pub(crate) fn is_tabulated(&self) -> bool {
        matches!(self.kind, ProfileKind::Mollified { .. } | ProfileKind::Tabulated { .. })
    }

    /// Integrate `w(k) * phi_hat(k)` over `[0, cutoff]`, where `w` is smooth.
    /// `oscillation` is an upper bound on the angular frequency of `w`.
    pub fn integrate_weighted<F: Fn(f64) -> f64>(&self, oscillation: f64, w: F) -> f64 {
        let bp = self.breakpoints();
        let mut acc = NeumaierSum::new();
        if self.is_tabulated() {
            let rule = gauss_legendre(3);
            for seg in bp.windows(2) {
                let (a, b) = (seg[0], seg[1]);
                let panels = ((b - a) * oscillation / PI).ceil().max(1.0) as usize;
                acc.add(rule.integrate_panels(a, b, panels, |k| w(k) * self.eval_phi_hat(k)));
            }
        } else {
            let rule = gauss_legendre(16);
            for seg in bp.windows(2) {
                let (a, b) = (seg[0], seg[1]);
                let min_panels = match self.kind {
                    ProfileKind::Bump { .. } => 16.0,
                    _ => 4.0,
                };
                let panels = ((b - a) * oscillation / PI).ceil().max(min_panels) as usize;
                acc.add(rule.integrate_panels(a, b, panels, |k| w(k) * self.eval_phi_hat(k)));
            }
        }
        acc.sum()
    }

    /// `phi(0) = (2 pi)^{-d} * |S^{d-1}| * int_0^K0 phi_hat(k) k^{d-1} dk`.
    pub fn phi_hat_integral(&self) -> f64 {
        let d = self.dimension;
        let radial = self.integrate_weighted(0.0, |k| k.powi(d as i32 - 1));
        unit_sphere_area(d) * radial / (2.0 * PI).powi(d as i32)
    }

    /// For a three-dimensional polynomial profile, `(A, C)` such that
    /// `phi(r) ~ [A cos(K0 r) + C] / r^4`, with `A = (k f)''(K0) / (2 pi^2)`
    /// and `C = -(k f)''(0) / (2 pi^2)`.
    pub fn asymptotic_amplitude_3d(&self) -> Result<(f64, f64)> {
        if self.dimension != 3 {
            return Err(Error::Unsupported("asymptotic amplitude needs d = 3".into()));
        }
        let coeffs = self
            .polynomial_coeffs()
            .ok_or_else(|| Error::Unsupported("asymptotic amplitude needs a polynomial profile".into()))?;
        let h2 = derivative(&derivative(&times_k(coeffs)));
        let norm = 2.0 * PI * PI;
        Ok((horner(&h2, self.cutoff) / norm, -horner(&h2, 0.0) / norm))
    }

    /// True when the profile is a polynomial with a double root at the cutoff,
    /// the condition under which the partial-integration form is valid.
    pub fn has_double_root_at_cutoff(&self) -> bool {
        match self.polynomial_coeffs() {
            Some(coeffs) => {
                let scale = coeffs
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c.abs() * self.cutoff.powi(i as i32))
                    .fold(0.0, f64::max);
                horner(coeffs, self.cutoff).abs() <= ENDPOINT_TOLERANCE * scale
                    && (horner(&derivative(coeffs), self.cutoff) * self.cutoff).abs()
                        <= ENDPOINT_TOLERANCE * scale
            }
            None => false,
        }
    }

    /// Check `phi_hat >= 0` on a dense grid of `[0, cutoff]`.
    pub fn check_nonnegative(&self) -> Result<()> {
        let n = VALIDATION_GRID_POINTS;
        let mut scale: f64 = 0.0;
        let mut worst = (0.0, f64::INFINITY);
        for i in 0..n {
            let k = self.cutoff * i as f64 / (n - 1) as f64;
            let v = self.eval_phi_hat(k);
            if !v.is_finite() {
                return Err(Error::InvalidProfile(format!("phi_hat({k}) is not finite")));
            }
            scale = scale.max(v.abs());
            if v < worst.1 {
                worst = (k, v);
            }
        }
        if worst.1 < -1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidProfile(format!(
                "phi_hat({}) = {:e} is negative",
                worst.0, worst.1
            )));
        }
        Ok(())
    }
}

/// Coefficients of `k * p(k)`.
pub(crate) fn times_k(coeffs: &[f64]) -> Vec<f64> {
    std::iter::once(0.0).chain(coeffs.iter().copied()).collect()
}

/// Surface area of the unit sphere in `d` dimensions (2, 2 pi, 4 pi).
pub fn unit_sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => panic!("unsupported dimension {d}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const K0: f64 = 2.0 * PI;

    #[test]
    fn triangle_profile_values() {
        let p = SpectralProfile::triangle_1d(K0).unwrap();
        assert_eq!(p.eval_phi_hat(0.0), K0);
        assert_eq!(p.eval_phi_hat(2.0 * K0), 0.0);
        assert_eq!(p.eval_phi_hat(K0), 0.0);
        assert_eq!(p.phi_hat_at_zero(), K0);
        let phi0 = p.phi_hat_integral();
        assert!((phi0 - K0 * K0 / (2.0 * PI)).abs() < 1e-13 * phi0);
    }

    #[test]
    fn longrange_example_satisfies_endpoint_conditions() {
        let p = SpectralProfile::longrange_example(K0).unwrap();
        assert_eq!(p.eval_phi_hat(K0), 0.0);
        let c = p.polynomial_coeffs().unwrap();
        let scale = PI * PI * K0.powi(4);
        assert!(horner(c, K0).abs() < 1e-13 * scale);
        assert!(horner(&derivative(c), K0).abs() * K0 < 1e-13 * scale);
        // f(0) = pi^2 |z|^2 K0^2 = pi^2 K0^4 / 10
        assert!((p.phi_hat_at_zero() - PI * PI * K0.powi(4) / 10.0).abs() < 1e-12 * scale);
        assert!(p.has_double_root_at_cutoff());
    }

    #[test]
    fn double_root_profile_accepted_and_linear_rejected() {
        // (k - K0)^2
        let ok = SpectralProfile::build_longrange_3d(vec![K0 * K0, -2.0 * K0, 1.0], K0);
        assert!(ok.is_ok());
        // K0 - k violates f'(K0) = 0
        let bad = SpectralProfile::build_longrange_3d(vec![K0, -1.0], K0);
        assert!(matches!(bad, Err(Error::ConstraintViolation(_))));
        // f(K0) != 0
        let bad = SpectralProfile::build_longrange_3d(vec![1.0], K0);
        assert!(matches!(bad, Err(Error::ConstraintViolation(_))));
        // -(k - K0)^2 is negative
        let neg = SpectralProfile::build_longrange_3d(vec![-K0 * K0, 2.0 * K0, -1.0], K0);
        assert!(matches!(neg, Err(Error::InvalidProfile(_))));
    }

    #[test]
    fn asymptotic_amplitudes() {
        let p = SpectralProfile::longrange_example(K0).unwrap();
        let (a, c) = p.asymptotic_amplitude_3d().unwrap();
        assert!((a - 1.3 * K0.powi(3)).abs() < 1e-12 * K0.powi(3));
        assert!(c.abs() < 1e-10 * K0.powi(3));

        // k (k - K0)^2 differentiated twice is 6k - 4K0: 2K0 at K0, -4K0 at 0
        let q = SpectralProfile::build_longrange_3d(vec![K0 * K0, -2.0 * K0, 1.0], K0).unwrap();
        let (a, c) = q.asymptotic_amplitude_3d().unwrap();
        assert!((a - K0 / (PI * PI)).abs() < 1e-13 * K0);
        assert!((c - 2.0 * K0 / (PI * PI)).abs() < 1e-13 * K0);

        let zero = SpectralProfile::polynomial(3, K0, vec![0.0]).unwrap();
        assert_eq!(zero.asymptotic_amplitude_3d().unwrap().0, 0.0);

        let tri = SpectralProfile::triangle_1d(K0).unwrap();
        assert!(matches!(tri.asymptotic_amplitude_3d(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn constant_tabulated_integral() {
        let p = SpectralProfile::tabulated(3, K0, vec![1.0; 64]).unwrap();
        let expected = K0.powi(3) / (6.0 * PI * PI);
        assert!((p.phi_hat_integral() - expected).abs() < 1e-13 * expected);
        assert_eq!(SpectralProfile::polynomial(3, K0, vec![0.0]).unwrap().phi_hat_integral(), 0.0);
    }

    #[test]
    fn piecewise_profile_matches_pieces() {
        // 1 on [0, 1), then 2 - k on [1, 2)
        let p = SpectralProfile::piecewise(1, vec![0.0, 1.0, 2.0], vec![vec![1.0], vec![2.0, -1.0]]).unwrap();
        assert_eq!(p.eval_phi_hat(0.5), 1.0);
        assert_eq!(p.eval_phi_hat(1.5), 0.5);
        assert_eq!(p.eval_phi_hat(2.0), 0.0);
        // (1/pi)(1 + 1/2)
        assert!((p.phi_hat_integral() - 1.5 / PI).abs() < 1e-14);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(SpectralProfile::polynomial(4, K0, vec![1.0]).is_err());
        assert!(SpectralProfile::polynomial(3, -1.0, vec![1.0]).is_err());
        assert!(SpectralProfile::tabulated(3, K0, vec![1.0, -0.5, 0.0]).is_err());
        assert!(SpectralProfile::bump(3, K0, -1.0).is_err());
    }

    #[test]
    fn expand_roots_conjugate_pair() {
        let z = Complex64::new(1.0, 2.0);
        // (k - z)(k - conj z) = k^2 - 2k + 5
        let c = expand_roots(1.0, &[z, z.conj()]).unwrap();
        assert_eq!(c, vec![5.0, -2.0, 1.0]);
        assert!(expand_roots(1.0, &[z]).is_err());
    }
}
