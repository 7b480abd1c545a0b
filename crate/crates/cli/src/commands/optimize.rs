use std::path::PathBuf;

use clap::{Args, Subcommand};
use gsc_core::optimizer::{
    minimize, minimize_from, structure_factor_map, structure_factor_map_periodic, Method, MinimizeSettings,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{read_positions, Outcome};
use crate::config::RunConfig;
use crate::output::{num, nums, Output};
use crate::CliError;

/// Largest factorization error accepted by `sfmap` on a lattice, relative to `N^2`.
const FACTORIZATION_TOLERANCE: f64 = 1e-10;

#[derive(Subcommand)]
pub enum Cmd {
    /// Minimize the periodized energy of N particles in the period cell.
    Run(RunArgs),
    /// Structure factors on the in-ball dual vectors of the period cell.
    Sfmap(SfmapArgs),
}

impl Cmd {
    pub fn name(&self) -> &'static str {
        match self {
            Cmd::Run(_) => "run",
            Cmd::Sfmap(_) => "sfmap",
        }
    }
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunArgs {
    /// Particle count (default: lattice points in the cell).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub particles: Option<usize>,
    /// `anneal-then-descent` (default) or `descent`.
    #[arg(long, value_parser = parse_method)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    /// CSV of Cartesian starting positions; replaces the random start.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<PathBuf>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient_tolerance: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_sweeps: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_cycles: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor_tolerance: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_temperature: Option<f64>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SfmapArgs {
    /// CSV of Cartesian positions (e.g. positions.csv of a run); defaults to
    /// the lattice points, with the factorization over the lattice checked.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    serde_json::from_value(json!(s)).map_err(|_| format!("unknown method {s:?}"))
}

pub fn run(cmd: &Cmd, config: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    match cmd {
        Cmd::Run(args) => optimize(config.params(args)?, config, out),
        Cmd::Sfmap(args) => sfmap(config.params(args)?, config, out),
    }
}

fn optimize(params: RunArgs, config: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let potential = config.potential()?;
    let lattice = config.configuration(potential.cutoff())?;
    let d = lattice.dimension();
    let cell = config.cell(&lattice, 2)?;
    let defaults = MinimizeSettings::default();
    let settings = MinimizeSettings {
        method: params.method.unwrap_or(Method::AnnealThenDescent),
        seed: config.seed(),
        max_iterations: params.max_iterations.unwrap_or(defaults.max_iterations),
        gradient_tolerance: params.gradient_tolerance.unwrap_or(defaults.gradient_tolerance),
        max_sweeps: params.max_sweeps.unwrap_or(defaults.max_sweeps),
        max_cycles: params.max_cycles.unwrap_or(defaults.max_cycles),
        floor_tolerance: params.floor_tolerance.unwrap_or(defaults.floor_tolerance),
        initial_temperature: params.initial_temperature,
    };
    let run = match &params.start {
        Some(path) => {
            let start: Vec<_> = read_positions(path, d)?
                .iter()
                .map(|r| cell.to_cell_fractional(r))
                .collect();
            if params.particles.is_some_and(|n| n != start.len()) {
                return Err(CliError::Usage("particles disagrees with the start file".into()));
            }
            minimize_from(&potential, &cell, &start, &settings)?
        }
        None => {
            let n = params.particles.unwrap_or_else(|| cell.points_of(&lattice).len());
            minimize(&potential, &cell, n, &settings)?
        }
    };
    out.json("run.json", &run)?;
    let header = super::coordinate_header(d);
    out.csv("positions.csv", &header, run.final_positions.iter().map(|p| nums(p)))?;
    out.csv("initial_positions.csv", &header, run.initial_positions.iter().map(|p| nums(p)))?;
    let trajectory = run
        .annealing_energies
        .iter()
        .enumerate()
        .map(|(i, e)| vec!["anneal".to_string(), i.to_string(), num(*e)])
        .chain(
            run.energies
                .iter()
                .enumerate()
                .map(|(i, e)| vec!["descent".to_string(), i.to_string(), num(*e)]),
        );
    out.csv("trajectory.csv", &["stage", "step", "energy"], trajectory)?;
    let result = json!({
        "seed": run.seed,
        "N": run.particles,
        "cell": run.cell,
        "final_energy": run.final_energy,
        "floor": run.floor,
        "floor_gap": run.floor_gap,
        "residual": run.residual,
        "iterations": run.iterations,
        "cycles": run.cycles,
        "gradient_norm": run.gradient_norm,
        "converged": run.converged,
    });
    let effective = json!({
        "particles": run.particles,
        "start": params.start,
        "settings": settings,
        "multipliers": cell.multipliers(),
    });
    Outcome::new(&effective, &result, Some(run.converged))
}

fn sfmap(params: SfmapArgs, config: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let potential = config.potential()?;
    let lattice = config.configuration(potential.cutoff())?;
    let d = lattice.dimension();
    let cell = config.cell(&lattice, 2)?;
    let map = match &params.positions {
        Some(path) => structure_factor_map(&potential, &cell, &read_positions(path, d)?)?,
        None => structure_factor_map_periodic(&potential, &cell, &lattice)?,
    };
    let opt_bool = |b: Option<bool>| b.map(|b| b.to_string()).unwrap_or_default();
    let opt_num = |x: Option<f64>| x.map(num).unwrap_or_default();
    out.csv(
        "sfmap.csv",
        &["norm", "n1", "n2", "n3", "phi_hat", "structure_factor_sq", "in_lattice_dual", "predicted"],
        map.rows.iter().map(|r| {
            vec![
                num(r.norm),
                r.coeffs[0].to_string(),
                r.coeffs[1].to_string(),
                r.coeffs[2].to_string(),
                num(r.phi_hat),
                num(r.structure_factor_sq),
                opt_bool(r.in_lattice_dual),
                opt_num(r.predicted),
            ]
        }),
    )?;
    let passed = map.max_factorization_error.map(|e| e <= FACTORIZATION_TOLERANCE);
    let result = json!({
        "particles": map.particles,
        "dual_vectors": map.rows.len(),
        "residual": map.residual,
        "max_factorization_error": map.max_factorization_error,
        "multipliers": cell.multipliers(),
    });
    Outcome::new(&params, &result, passed)
}
