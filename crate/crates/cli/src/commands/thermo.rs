use clap::{Args, Subcommand};
use gsc_core::energy::{legendre_check, linspace, LegendreRow};
use gsc_core::lattice::LatticeName;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::Outcome;
use crate::config::RunConfig;
use crate::output::{num, Output};
use crate::CliError;

#[derive(Subcommand)]
pub enum Cmd {
    /// Check that the canonical and grand energy densities are Legendre duals.
    Legendre(LegendreArgs),
}

impl Cmd {
    pub fn name(&self) -> &'static str {
        match self {
            Cmd::Legendre(_) => "legendre",
        }
    }
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegendreArgs {
    /// Densities and chemical potentials checked (default 9 each).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<usize>,
    /// Points of each optimization grid (default 80001).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    /// Error allowed relative to the largest closed-form value (default 1e-6).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

pub fn run(cmd: &Cmd, config: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    match cmd {
        Cmd::Legendre(args) => legendre(config.params(args)?, config, out),
    }
}

/// Density and chemical-potential scales: `rho_s = |phi(0)| / (2 phi_hat(0))`
/// and `mu_s = phi_hat(0) rho_s`.
fn legendre(params: LegendreArgs, config: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let potential = config.potential()?;
    let phi_hat0 = potential.phi_hat_at_zero();
    let phi0 = potential.phi_at_zero();
    let values = params.values.unwrap_or(9);
    let grid_points = params.grid_points.unwrap_or(80_001);
    let tol = params.tolerance.unwrap_or(1e-6);
    if values < 2 || grid_points < 2 {
        return Err(CliError::Usage("values and grid_points must be at least 2".into()));
    }
    if !(phi_hat0 > 0.0) {
        return Err(CliError::Usage("the Legendre check needs phi_hat(0) > 0".into()));
    }
    let rho_s = (phi0.abs() / (2.0 * phi_hat0)).max(f64::MIN_POSITIVE);
    let mu_s = phi_hat0 * rho_s;
    let rho_values = linspace(0.0, 3.0 * rho_s, values);
    let mu_values = linspace(-3.0 * mu_s, 5.0 * mu_s, values);
    let mu_grid = linspace(-4.0 * mu_s, 8.0 * mu_s, grid_points);
    let rho_grid = linspace(0.0, 8.0 * rho_s, grid_points);
    let report = legendre_check(phi_hat0, phi0, &rho_values, &mu_values, &mu_grid, &rho_grid)?;

    let rows = |tag: &'static str, rows: &[LegendreRow]| {
        rows.iter()
            .map(|r| {
                vec![
                    tag.to_string(),
                    num(r.argument),
                    num(r.closed_form),
                    num(r.numeric),
                    num(r.optimizer),
                    num(r.predicted_optimizer),
                    num(r.error),
                ]
            })
            .collect::<Vec<_>>()
    };
    let mut table = rows("e_rho", &report.rho_rows);
    table.extend(rows("e_mu", &report.mu_rows));
    out.csv(
        "legendre.csv",
        &["function", "argument", "closed_form", "numeric", "optimizer", "predicted_optimizer", "error"],
        table,
    )?;

    let scale = report
        .rho_rows
        .iter()
        .chain(&report.mu_rows)
        .map(|r| r.closed_form.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let relative_error = report.max_error / scale;
    let passed = relative_error <= tol && report.max_stationarity_offset <= 1.0;
    let self_density = phi0 / (2.0 * phi_hat0);
    let threshold = match potential.dimension() {
        3 => LatticeName::Bcc.closed_form_threshold(potential.cutoff()),
        _ => None,
    };
    let result = json!({
        "phi_hat_at_zero": phi_hat0,
        "phi_at_zero": phi0,
        "density_scale": rho_s,
        "max_error": report.max_error,
        "relative_error": relative_error,
        "max_stationarity_offset": report.max_stationarity_offset,
        "self_density": self_density,
        "bcc_threshold_density": threshold,
        "self_density_exceeds_threshold": threshold.map(|t| self_density > t),
    });
    let effective = json!({"values": values, "grid_points": grid_points, "tolerance": tol});
    Outcome::new(&effective, &result, Some(passed))
}
