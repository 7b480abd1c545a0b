//! Real-space pair potentials obtained by radial inverse transforms of a
//! spectral profile.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::{derivative, horner, times_k, SpectralProfile};
use crate::numerics::{bessel_j0, gauss_legendre, NeumaierSum};

/// `K0 r` above which three-dimensional polynomial profiles use the
/// partially integrated transform.
pub const PARTIAL_INTEGRATION_SWITCH: f64 = 30.0;

#[inline]
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Real-space evaluator `phi(r) = (2 pi)^{-d} int phi_hat(k) e^{i k.r} dk`.
#[derive(Debug, Clone)]
pub struct PairPotential {
    profile: SpectralProfile,
    phi_at_zero: f64,
    asymptotic_amplitude: Option<f64>,
    asymptotic_constant: Option<f64>,
}

impl PairPotential {
    pub fn new(profile: SpectralProfile) -> PairPotential {
        let phi_at_zero = profile.phi_hat_integral();
        let (asymptotic_amplitude, asymptotic_constant) =
            if profile.dimension() == 3 && profile.has_double_root_at_cutoff() {
                match profile.asymptotic_amplitude_3d() {
                    Ok((a, c)) => (Some(a), Some(c)),
                    Err(_) => (None, None),
                }
            } else {
                (None, None)
            };
        PairPotential {
            profile,
            phi_at_zero,
            asymptotic_amplitude,
            asymptotic_constant,
        }
    }

    pub fn profile(&self) -> &SpectralProfile {
        &self.profile
    }

    pub fn dimension(&self) -> usize {
        self.profile.dimension()
    }

    pub fn cutoff(&self) -> f64 {
        self.profile.cutoff()
    }

    /// `phi(0)`.
    pub fn phi_at_zero(&self) -> f64 {
        self.phi_at_zero
    }

    /// `phi_hat(0)`.
    pub fn phi_hat_at_zero(&self) -> f64 {
        self.profile.phi_hat_at_zero()
    }

    #[inline]
    pub fn phi_hat(&self, k: f64) -> f64 {
        self.profile.eval_phi_hat(k)
    }

    /// `A` in `phi(r) ~ A cos(K0 r) / r^4` for the long-range family.
    pub fn asymptotic_amplitude(&self) -> Option<f64> {
        self.asymptotic_amplitude
    }

    /// Non-oscillatory `1/r^4` coefficient of the long-range family.
    pub fn asymptotic_constant(&self) -> Option<f64> {
        self.asymptotic_constant
    }

    /// `phi(r)`, switching to the partially integrated form for
    /// three-dimensional polynomial profiles when `K0 r` is large.
    pub fn eval_phi(&self, r: f64) -> f64 {
        let r = r.abs();
        if self.asymptotic_amplitude.is_some() && self.cutoff() * r > PARTIAL_INTEGRATION_SWITCH {
            self.eval_phi_partial_integration(r)
                .expect("long-range profile supports the partially integrated form")
        } else {
            self.eval_phi_direct(r)
        }
    }

    /// Direct quadrature of the radial inverse transform.
    pub fn eval_phi_direct(&self, r: f64) -> f64 {
        let r = r.abs();
        let p = &self.profile;
        match p.dimension() {
            1 => p.integrate_weighted(r, |k| (k * r).cos()) / PI,
            2 => p.integrate_weighted(r, |k| k * bessel_j0(k * r)) / (2.0 * PI),
            _ => p.integrate_weighted(r, |k| k * k * sinc(k * r)) / (2.0 * PI * PI),
        }
    }

    /// `phi(r) = [ [(kf)'' cos kr]_0^K0 - int_0^K0 (kf)''' cos kr dk ] / (2 pi^2 r^4)`,
    /// valid for three-dimensional polynomial profiles with `f(K0) = f'(K0) = 0`.
    pub fn eval_phi_partial_integration(&self, r: f64) -> Option<f64> {
        if self.dimension() != 3 || !self.profile.has_double_root_at_cutoff() || r == 0.0 {
            return None;
        }
        let coeffs = self.profile.polynomial_coeffs()?;
        let k0 = self.cutoff();
        let h2 = derivative(&derivative(&times_k(coeffs)));
        let h3 = derivative(&h2);
        let boundary = horner(&h2, k0) * (k0 * r).cos() - horner(&h2, 0.0);
        let rule = gauss_legendre(16);
        let panels = ((k0 * r / PI).ceil() as usize).max(4);
        let tail = rule.integrate_panels(0.0, k0, panels, |k| horner(&h3, k) * (k * r).cos());
        Some((boundary - tail) / (2.0 * PI * PI * r.powi(4)))
    }

    /// `phi(|x|)` for a `d`-vector.
    pub fn eval_phi_vec(&self, x: &[f64]) -> f64 {
        self.eval_phi(x.iter().map(|v| v * v).sum::<f64>().sqrt())
    }
}

/// `phi(r)` sampled on a uniform grid with four-point Lagrange interpolation,
/// for real-space sums over many pairs.
#[derive(Debug, Clone)]
pub struct RadialTable {
    step: f64,
    values: Vec<f64>,
}

impl RadialTable {
    /// Tabulate on `[0, r_max]` with roughly `points_per_wavelength` samples
    /// per `2 pi / K0`.
    pub fn build(potential: &PairPotential, r_max: f64, points_per_wavelength: usize) -> RadialTable {
        let wavelength = 2.0 * PI / potential.cutoff();
        let step = wavelength / points_per_wavelength.max(8) as f64;
        let n = (r_max / step).ceil() as usize + 4;
        let values: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| potential.eval_phi(i as f64 * step))
            .collect();
        RadialTable { step, values }
    }

    pub fn r_max(&self) -> f64 {
        self.step * (self.values.len() - 3) as f64
    }

    /// Interpolated `phi(r)`; panics beyond the tabulated range.
    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        let s = r.abs() / self.step;
        let i = s.floor() as usize;
        assert!(i + 2 < self.values.len(), "r = {r} beyond tabulated range");
        let t = s - i as f64;
        // nodes i-1, i, i+1, i+2; phi is even so the node at -step mirrors +step
        let ym1 = if i == 0 { self.values[1] } else { self.values[i - 1] };
        let (y0, y1, y2) = (self.values[i], self.values[i + 1], self.values[i + 2]);
        let c0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
        let c1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
        let c2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
        let c3 = (t + 1.0) * t * (t - 1.0) / 6.0;
        c0 * ym1 + c1 * y0 + c2 * y1 + c3 * y2
    }

    /// `phi(|x|)` for a vector.
    #[inline]
    pub fn eval_vec(&self, x: &[f64]) -> f64 {
        self.eval(x.iter().map(|v| v * v).sum::<f64>().sqrt())
    }
}

/// Sum of `phi(r_i - r_j)` over all ordered pairs, including `i = j`.
pub fn pair_sum_all(potential: &PairPotential, points: &[Vec<f64>]) -> f64 {
    let mut acc = NeumaierSum::new();
    for a in points {
        for b in points {
            let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            acc.add(potential.eval_phi_vec(&diff));
        }
    }
    acc.sum()
}
