use clap::{Args, Subcommand};
use gsc_core::lattice::{minimal_bravais_check, threshold_density, threshold_table, truncate};
use gsc_core::verify::is_admissible;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::Outcome;
use crate::config::RunConfig;
use crate::output::{num, Output};
use crate::CliError;

/// Agreement required between computed and closed-form thresholds.
const THRESHOLD_TOLERANCE: f64 = 1e-10;

#[derive(Subcommand)]
pub enum Cmd {
    /// Geometry, density, reciprocal shells and threshold of a lattice.
    Info(InfoArgs),
    /// Threshold densities of the named lattices.
    Thresholds(ThresholdArgs),
    /// Search for the Bravais lattice of least threshold density.
    MinimalBravais(MinimalArgs),
}

impl Cmd {
    pub fn name(&self) -> &'static str {
        match self {
            Cmd::Info(_) => "info",
            Cmd::Thresholds(_) => "thresholds",
            Cmd::MinimalBravais(_) => "minimal-bravais",
        }
    }
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfoArgs {
    /// Radius of the shell table as a multiple of K0 (default 2).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shell_radius: Option<f64>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdArgs {}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimalArgs {
    /// Dimension to search (default 3).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
}

pub fn run(cmd: &Cmd, config: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    match cmd {
        Cmd::Info(args) => info(config.params(args)?, config, out),
        Cmd::Thresholds(args) => thresholds(config.params(args)?, config, out),
        Cmd::MinimalBravais(args) => minimal(config.params(args)?, config, out),
    }
}

fn info(params: InfoArgs, config: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let k0 = config.cutoff()?;
    let lattice = config.configuration(k0)?;
    let d = lattice.dimension();
    let radius = params.shell_radius.unwrap_or(2.0);
    if !(radius.is_finite() && radius > 0.0) {
        return Err(CliError::Usage("shell_radius must be positive".into()));
    }
    let recip = lattice.reciprocal()?;
    let shells = recip.shells(radius * k0, 1e-10);
    out.csv(
        "shells.csv",
        &["norm", "multiplicity", "inside_cutoff"],
        shells
            .iter()
            .map(|s| vec![num(s.norm), s.multiplicity.to_string(), (s.norm < k0).to_string()]),
    )?;
    let q = recip.shortest_norm();
    let result = json!({
        "name": lattice.name(),
        "dimension": d,
        "generators": lattice.basis().generators(),
        "offsets": lattice.offsets().iter().map(|y| truncate(d, y)).collect::<Vec<_>>(),
        "points_per_cell": lattice.points_per_cell(),
        "cell_volume": lattice.basis().cell_volume(),
        "density": lattice.density(),
        "reciprocal_generators": recip.generators(),
        "shortest_reciprocal": q,
        "cutoff": k0,
        "admissible": is_admissible(q, k0),
        "threshold_density": threshold_density(&lattice, k0)?,
        "minimal": lattice.is_minimal(),
        "shells": shells.len(),
    });
    Outcome::new(&json!({"shell_radius": radius}), &result, None)
}

fn thresholds(params: ThresholdArgs, config: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let k0 = config.cutoff()?;
    let rows = threshold_table(k0)?;
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    out.csv(
        "thresholds.csv",
        &["name", "dimension", "closed_form", "computed", "relative_difference", "shape_constant"],
        rows.iter().map(|r| {
            vec![
                r.name.clone(),
                r.dimension.to_string(),
                opt(r.closed_form),
                num(r.computed),
                opt(r.relative_difference),
                num(r.shape_constant),
            ]
        }),
    )?;
    let worst = rows
        .iter()
        .filter_map(|r| r.relative_difference)
        .fold(0.0, f64::max);
    let find = |name: &str| rows.iter().find(|r| r.name == name).map(|r| r.computed);
    let ordering = match (find("bcc"), find("fcc"), find("sc")) {
        (Some(b), Some(f), Some(s)) => b < f && f < s,
        _ => false,
    };
    let passed = worst <= THRESHOLD_TOLERANCE && ordering;
    let result = json!({
        "cutoff": k0,
        "max_relative_difference": worst,
        "tolerance": THRESHOLD_TOLERANCE,
        "ordering_bcc_fcc_sc": ordering,
        "rows": rows,
    });
    Outcome::new(&params, &result, Some(passed))
}

fn minimal(params: MinimalArgs, config: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let k0 = config.cutoff()?;
    let d = params.dimension.unwrap_or(3);
    let report = minimal_bravais_check(d, k0, config.seed())?;
    out.csv(
        "generators.csv",
        &super::coordinate_header(d),
        report.generators.iter().map(|g| crate::output::nums(g)),
    )?;
    let passed = report.matches_expected;
    Outcome::new(&json!({"dimension": d}), &report, Some(passed))
}
