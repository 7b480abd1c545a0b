use std::path::PathBuf;

use clap::{Args, Subcommand};
use gsc_core::energy::{box_energy, energy_density, realspace_energy_oracle, ExternalField};
use gsc_core::verify::{is_admissible, trial_rng, PLATEAU_TOLERANCE};
use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{coordinate_header, point_row, read_positions, write_positions, Outcome};
use crate::config::RunConfig;
use crate::output::{num, Output};
use crate::CliError;

#[derive(Subcommand)]
pub enum Cmd {
    /// Energy density of a periodic configuration, itemized by reciprocal vector.
    Density(DensityArgs),
    /// Periodized energy of the points in a period cell.
    Box(BoxArgs),
    /// External field at seeded random points.
    Field(FieldArgs),
    /// Real-space oracle for the energy density.
    Oracle(OracleArgs),
}

impl Cmd {
    pub fn name(&self) -> &'static str {
        match self {
            Cmd::Density(_) => "density",
            Cmd::Box(_) => "box",
            Cmd::Field(_) => "field",
            Cmd::Oracle(_) => "oracle",
        }
    }
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityArgs {
    /// Relative tolerance of the plateau check (default 1e-12).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxArgs {
    /// CSV of Cartesian positions; defaults to the lattice points in the cell.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldArgs {
    /// Number of random points in the primitive cell (default 1000).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    /// Allowed deviation relative to rho phi_hat(0) (default 1e-10).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleArgs {
    /// Real-space cutoff radius in units of 1 / K0 (default 40).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

pub fn run(cmd: &Cmd, config: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    match cmd {
        Cmd::Density(args) => density(config.params(args)?, config, out),
        Cmd::Box(args) => periodized(config.params(args)?, config, out),
        Cmd::Field(args) => field(config.params(args)?, config, out),
        Cmd::Oracle(args) => oracle(config.params(args)?, config, out),
    }
}

fn density(params: DensityArgs, config: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let potential = config.potential()?;
    let lattice = config.configuration(potential.cutoff())?;
    let tol = params.tolerance.unwrap_or(PLATEAU_TOLERANCE);
    let report = energy_density(&potential, &lattice)?;
    out.csv(
        "shells.csv",
        &["norm", "n1", "n2", "n3", "phi_hat", "weight", "contribution"],
        report.terms.iter().map(|t| {
            vec![
                num(t.norm),
                t.coeffs[0].to_string(),
                t.coeffs[1].to_string(),
                t.coeffs[2].to_string(),
                num(t.phi_hat),
                num(t.weight),
                num(t.contribution),
            ]
        }),
    )?;
    let excess = report.energy_density - report.plateau;
    let slack = tol * report.plateau.abs();
    let passed = if report.admissible { excess.abs() <= slack } else { excess >= -slack };
    let mut result = super::value(&report)?;
    result["excess"] = json!(excess);
    Outcome::new(&json!({"tolerance": tol}), &result, Some(passed))
}

fn periodized(params: BoxArgs, config: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let potential = config.potential()?;
    let lattice = config.configuration(potential.cutoff())?;
    let d = lattice.dimension();
    let cell = config.cell(&lattice, 2)?;
    let points = match &params.positions {
        Some(path) => read_positions(path, d)?,
        None => cell.points_of(&lattice),
    };
    let report = box_energy(&potential, &cell, &points)?;
    write_positions(out, "positions.csv", d, &points)?;
    out.csv(
        "structure_factors.csv",
        &["norm", "n1", "n2", "n3", "phi_hat", "structure_factor_sq", "contribution"],
        report.entries.iter().map(|e| {
            vec![
                num(e.norm),
                e.coeffs[0].to_string(),
                e.coeffs[1].to_string(),
                e.coeffs[2].to_string(),
                num(e.phi_hat),
                num(e.structure_factor_sq),
                num(e.contribution),
            ]
        }),
    )?;
    let result = json!({
        "cell": super::cell_rows(&cell),
        "multipliers": cell.multipliers(),
        "particles": report.particles,
        "volume": report.volume,
        "energy": report.energy,
        "fluctuation": report.fluctuation,
        "floor": report.floor,
        "dual_vectors": report.entries.len(),
    });
    Outcome::new(&params, &result, None)
}

fn field(params: FieldArgs, config: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let potential = config.potential()?;
    let lattice = config.configuration(potential.cutoff())?;
    let d = lattice.dimension();
    let n = params.points.unwrap_or(1000);
    let tol = params.tolerance.unwrap_or(1e-10);
    let field = ExternalField::new(&potential, &lattice)?;
    let mut rng = trial_rng(config.seed(), 0);
    let basis = lattice.basis();
    let mut worst: f64 = 0.0;
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let mut f = Vector3::zeros();
        for c in 0..d {
            f[c] = rng.random::<f64>();
        }
        let r = basis.to_cartesian(&f);
        let s = field.eval(&r);
        worst = worst.max(s.deviation.abs());
        let mut row = point_row(d, &r);
        row.push(num(s.value));
        row.push(num(s.deviation));
        rows.push(row);
    }
    let mut header = coordinate_header(d);
    header.extend(["field", "deviation"]);
    out.csv("field.csv", &header, rows)?;
    let expected = field.expected();
    let passed = worst <= tol * expected.abs();
    let result = json!({
        "points": n,
        "expected": expected,
        "max_deviation": worst,
        "relative_deviation": worst / expected.abs(),
        "admissible": is_admissible(lattice.reciprocal()?.shortest_norm(), potential.cutoff()),
    });
    Outcome::new(&json!({"points": n, "tolerance": tol}), &result, Some(passed))
}

fn oracle(params: OracleArgs, config: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let potential = config.potential()?;
    let k0 = potential.cutoff();
    let lattice = config.configuration(k0)?;
    let radius = params.radius.unwrap_or(40.0);
    if !(radius.is_finite() && radius > 0.0) {
        return Err(CliError::Usage("radius must be positive".into()));
    }
    let reciprocal = energy_density(&potential, &lattice)?.energy_density;
    let real = realspace_energy_oracle(&potential, &lattice, radius / k0, None)?;
    let difference = (real.energy_density - reciprocal).abs();
    out.csv(
        "oracle.csv",
        &["method", "energy_density", "bound"],
        [
            vec!["reciprocal".to_string(), num(reciprocal), num(0.0)],
            vec!["real_space".to_string(), num(real.energy_density), num(real.tail_bound)],
        ],
    )?;
    let result = json!({
        "reciprocal": reciprocal,
        "real_space": real.energy_density,
        "difference": difference,
        "tail_bound": real.tail_bound,
        "cutoff_radius": real.cutoff,
        "pair_count": real.pair_count,
    });
    Outcome::new(&json!({"radius": radius}), &result, Some(difference <= real.tail_bound))
}
