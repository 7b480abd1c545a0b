//! Subcommand groups. Each command merges its flags over the `params`
//! object of the run configuration, runs, writes its tables and returns an
//! [`Outcome`] for the summary.

pub mod energy;
pub mod lattice;
pub mod optimize;
pub mod potential;
pub mod thermo;
pub mod verify;

use std::path::Path;

use gsc_core::lattice::{truncate, PeriodCell};
use nalgebra::Vector3;
use serde::Serialize;
use serde_json::Value;

use crate::output::nums;
use crate::CliError;

pub struct Outcome {
    /// Effective command parameters after defaults are applied.
    pub params: Value,
    pub result: Value,
    /// `Some(false)` makes the process exit with status 1.
    pub passed: Option<bool>,
}

impl Outcome {
    pub fn new<P: Serialize, R: Serialize>(params: &P, result: &R, passed: Option<bool>) -> Result<Outcome, CliError> {
        Ok(Outcome {
            params: value(params)?,
            result: value(result)?,
            passed,
        })
    }
}

pub fn value<T: Serialize + ?Sized>(x: &T) -> Result<Value, CliError> {
    serde_json::to_value(x).map_err(|e| CliError::Failure(e.to_string()))
}

pub fn coordinate_header(d: usize) -> Vec<&'static str> {
    ["x", "y", "z"][..d].to_vec()
}

pub fn point_row(d: usize, p: &Vector3<f64>) -> Vec<String> {
    nums(&truncate(d, p))
}

/// Cartesian positions from a CSV file with one point per row; a header
/// row and extra columns are ignored.
pub fn read_positions(path: &Path, d: usize) -> Result<Vec<Vector3<f64>>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut points = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let parsed: Result<Vec<f64>, _> = record.iter().take(d).map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.len() == d => {
                let mut p = Vector3::zeros();
                for (c, x) in v.into_iter().enumerate() {
                    p[c] = x;
                }
                points.push(p);
            }
            _ if line == 0 => continue,
            _ => {
                return Err(CliError::Usage(format!(
                    "{}: row {} needs {d} numeric coordinates",
                    path.display(),
                    line + 1
                )))
            }
        }
    }
    if points.is_empty() {
        return Err(CliError::Usage(format!("{}: no positions", path.display())));
    }
    Ok(points)
}

pub fn write_positions(
    out: &mut crate::output::Output,
    name: &str,
    d: usize,
    points: &[Vector3<f64>],
) -> Result<(), CliError> {
    out.csv(name, &coordinate_header(d), points.iter().map(|p| point_row(d, p)))
}

pub fn cell_rows(cell: &PeriodCell) -> Vec<Vec<f64>> {
    let d = cell.dimension();
    let edges = cell.edges();
    (0..d).map(|i| truncate(d, &edges.generator(i))).collect()
}

/// Length scale `rho^{-1/d}`.
pub fn spacing(density: f64, d: usize) -> f64 {
    density.powf(-1.0 / d as f64)
}
