//! Canonical and grand-canonical ground-state energy densities on the
//! plateau branch and their Legendre duality.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::PairPotential;

/// Thermodynamic quantities at density `rho` on the plateau branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thermodynamics {
    pub phi_hat_at_zero: f64,
    pub phi_at_zero: f64,
    pub density: f64,
    /// `mu = phi_hat(0) rho - phi(0)/2`.
    pub mu: f64,
    pub e_rho: f64,
    pub e_mu: f64,
    /// Box chemical potential for the cell it was evaluated on, if any.
    pub mu_lambda: Option<f64>,
}

impl Thermodynamics {
    pub fn new(phi_hat_at_zero: f64, phi_at_zero: f64, density: f64) -> Thermodynamics {
        let mu = phi_hat_at_zero * density - 0.5 * phi_at_zero;
        Thermodynamics {
            phi_hat_at_zero,
            phi_at_zero,
            density,
            mu,
            e_rho: e_rho(phi_hat_at_zero, phi_at_zero, density),
            e_mu: e_mu(phi_hat_at_zero, phi_at_zero, mu).unwrap_or(f64::NAN),
            mu_lambda: None,
        }
    }

    pub fn from_potential(potential: &PairPotential, density: f64) -> Thermodynamics {
        Thermodynamics::new(potential.phi_hat_at_zero(), potential.phi_at_zero(), density)
    }

    /// Density `[mu + phi(0)/2] / phi_hat(0)` paired with `mu`.
    pub fn density_for_mu(phi_hat_at_zero: f64, phi_at_zero: f64, mu: f64) -> Result<f64> {
        if !(phi_hat_at_zero > 0.0) {
            return Err(Error::Unsupported("phi_hat(0) must be positive".into()));
        }
        Ok((mu + 0.5 * phi_at_zero) / phi_hat_at_zero)
    }
}

/// `e_rho = (rho/2)[rho phi_hat(0) - phi(0)]`.
pub fn e_rho(phi_hat_at_zero: f64, phi_at_zero: f64, rho: f64) -> f64 {
    0.5 * rho * (rho * phi_hat_at_zero - phi_at_zero)
}

/// `e_mu = -[mu + phi(0)/2]^2 / (2 phi_hat(0))` for `mu >= -phi(0)/2`, and `0`
/// below, where the minimizing density is zero.
pub fn e_mu(phi_hat_at_zero: f64, phi_at_zero: f64, mu: f64) -> Result<f64> {
    if !(phi_hat_at_zero > 0.0) {
        return Err(Error::Unsupported("e_mu needs phi_hat(0) > 0".into()));
    }
    let s = mu + 0.5 * phi_at_zero;
    Ok(if s > 0.0 { -s * s / (2.0 * phi_hat_at_zero) } else { 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegendreRow {
    /// `rho` for the `e_rho` rows, `mu` for the `e_mu` rows.
    pub argument: f64,
    pub closed_form: f64,
    pub numeric: f64,
    /// Grid point attaining the extremum.
    pub optimizer: f64,
    /// Optimizer predicted by the linear `rho`-`mu` relation.
    pub predicted_optimizer: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegendreReport {
    pub phi_hat_at_zero: f64,
    pub phi_at_zero: f64,
    pub rho_rows: Vec<LegendreRow>,
    pub mu_rows: Vec<LegendreRow>,
    pub max_error: f64,
    /// Largest optimizer offset, in units of the relevant grid spacing.
    pub max_stationarity_offset: f64,
}

/// `e_rho = max_mu {e_mu + mu rho}` and `e_mu = min_{rho >= 0} {e_rho - mu rho}`
/// evaluated by brute force over the grids.
pub fn legendre_check(
    phi_hat_at_zero: f64,
    phi_at_zero: f64,
    rho_values: &[f64],
    mu_values: &[f64],
    mu_grid: &[f64],
    rho_grid: &[f64],
) -> Result<LegendreReport> {
    if !(phi_hat_at_zero > 0.0) {
        return Err(Error::Unsupported("Legendre check needs phi_hat(0) > 0".into()));
    }
    if mu_grid.len() < 2 || rho_grid.len() < 2 {
        return Err(Error::InvalidParameter("grids need at least two points".into()));
    }
    let spacing = |g: &[f64]| (g[g.len() - 1] - g[0]).abs() / (g.len() - 1) as f64;
    let (dmu, drho) = (spacing(mu_grid), spacing(rho_grid));
    let mut max_error: f64 = 0.0;
    let mut max_offset: f64 = 0.0;

    let mut rho_rows = Vec::with_capacity(rho_values.len());
    for &rho in rho_values {
        let (mut best, mut arg) = (f64::NEG_INFINITY, f64::NAN);
        for &mu in mu_grid {
            let v = e_mu(phi_hat_at_zero, phi_at_zero, mu)? + mu * rho;
            if v > best {
                best = v;
                arg = mu;
            }
        }
        let closed = e_rho(phi_hat_at_zero, phi_at_zero, rho);
        let predicted = phi_hat_at_zero * rho - 0.5 * phi_at_zero;
        let row = LegendreRow {
            argument: rho,
            closed_form: closed,
            numeric: best,
            optimizer: arg,
            predicted_optimizer: predicted,
            error: (best - closed).abs(),
        };
        max_error = max_error.max(row.error);
        if rho > 0.0 {
            max_offset = max_offset.max((arg - predicted).abs() / dmu);
        }
        rho_rows.push(row);
    }

    let mut mu_rows = Vec::with_capacity(mu_values.len());
    for &mu in mu_values {
        let (mut best, mut arg) = (f64::INFINITY, f64::NAN);
        for &rho in rho_grid.iter().filter(|r| **r >= 0.0) {
            let v = e_rho(phi_hat_at_zero, phi_at_zero, rho) - mu * rho;
            if v < best {
                best = v;
                arg = rho;
            }
        }
        let closed = e_mu(phi_hat_at_zero, phi_at_zero, mu)?;
        let predicted = ((mu + 0.5 * phi_at_zero) / phi_hat_at_zero).max(0.0);
        let row = LegendreRow {
            argument: mu,
            closed_form: closed,
            numeric: best,
            optimizer: arg,
            predicted_optimizer: predicted,
            error: (best - closed).abs(),
        };
        max_error = max_error.max(row.error);
        max_offset = max_offset.max((arg - predicted).abs() / drho);
        mu_rows.push(row);
    }

    Ok(LegendreReport {
        phi_hat_at_zero,
        phi_at_zero,
        rho_rows,
        mu_rows,
        max_error,
        max_stationarity_offset: max_offset,
    })
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_example() {
        let t = Thermodynamics::new(1.0, 0.0, 1.0);
        assert_eq!(t.e_rho, 0.5);
        assert_eq!(t.mu, 1.0);
        assert_eq!(t.e_mu, -0.5);
        assert_eq!(e_rho(1.0, 0.3, 0.0), 0.0);
    }

    #[test]
    fn grids_recover_closed_forms() {
        let report = legendre_check(
            1.3,
            0.4,
            &[0.0, 0.5, 1.0, 2.0],
            &[-0.5, 0.0, 0.7, 2.0],
            &linspace(-3.0, 5.0, 80_001),
            &linspace(0.0, 4.0, 80_001),
        )
        .unwrap();
        assert!(report.max_error < 1e-6, "{}", report.max_error);
        assert!(report.max_stationarity_offset <= 1.0);
    }

    #[test]
    fn zero_phi_hat_is_unsupported() {
        assert!(e_mu(0.0, 1.0, 0.0).is_err());
        assert!(legendre_check(0.0, 1.0, &[1.0], &[1.0], &[0.0, 1.0], &[0.0, 1.0]).is_err());
    }
}
