use clap::{Args, Subcommand};
use gsc_core::spectral::{PairPotential, ProfileKind};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::Outcome;
use crate::config::RunConfig;
use crate::output::{num, Output};
use crate::CliError;

#[derive(Subcommand)]
pub enum Cmd {
    /// Build and validate a profile; writes profile.json.
    Build(BuildArgs),
    /// Evaluate phi(r) and phi_hat(k) at given points.
    Eval(EvalArgs),
    /// Tabulate phi and phi_hat on uniform grids.
    Tabulate(TabulateArgs),
}

impl Cmd {
    pub fn name(&self) -> &'static str {
        match self {
            Cmd::Build(_) => "build",
            Cmd::Eval(_) => "eval",
            Cmd::Tabulate(_) => "tabulate",
        }
    }
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildArgs {}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalArgs {
    /// Radii, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<f64>>,
    /// Wavenumbers, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<f64>>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulateArgs {
    /// Largest radius (default 40 / K0).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    /// Grid points of each table (default 1001).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

pub fn run(cmd: &Cmd, config: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let potential = config.potential()?;
    match cmd {
        Cmd::Build(args) => build(config.params(args)?, &potential, out),
        Cmd::Eval(args) => eval(config.params(args)?, &potential, out),
        Cmd::Tabulate(args) => tabulate(config.params(args)?, &potential, out),
    }
}

fn build(params: BuildArgs, potential: &PairPotential, out: &mut Output) -> Result<Outcome, CliError> {
    let profile = potential.profile();
    out.json("profile.json", &profile.to_spec())?;
    let nonnegative = profile.check_nonnegative();
    let kind = match profile.kind() {
        ProfileKind::Polynomial { .. } => "polynomial",
        ProfileKind::Piecewise { .. } => "piecewise",
        ProfileKind::Bump { .. } => "bump",
        ProfileKind::Mollified { .. } => "mollified",
        ProfileKind::Tabulated { .. } => "tabulated",
    };
    let asymptotics = profile.asymptotic_amplitude_3d().ok().map(|(a, c)| json!({"amplitude": a, "constant": c}));
    let result = json!({
        "dimension": profile.dimension(),
        "cutoff": profile.cutoff(),
        "kind": kind,
        "phi_hat_at_zero": potential.phi_hat_at_zero(),
        "phi_at_zero": potential.phi_at_zero(),
        "nonnegative": nonnegative.is_ok(),
        "violation": nonnegative.as_ref().err().map(|e| e.to_string()),
        "double_root_at_cutoff": profile.has_double_root_at_cutoff(),
        "asymptotics": asymptotics,
    });
    Outcome::new(&params, &result, Some(nonnegative.is_ok()))
}

fn eval(params: EvalArgs, potential: &PairPotential, out: &mut Output) -> Result<Outcome, CliError> {
    let r = params.r.clone().unwrap_or_default();
    let k = params.k.clone().unwrap_or_default();
    if r.is_empty() && k.is_empty() {
        return Err(CliError::Usage("give --r and/or --k".into()));
    }
    if r.iter().chain(&k).any(|x| !x.is_finite()) {
        return Err(CliError::Usage("evaluation points must be finite".into()));
    }
    let phi: Vec<f64> = r.iter().map(|x| potential.eval_phi(x.abs())).collect();
    let phi_hat: Vec<f64> = k.iter().map(|x| potential.phi_hat(x.abs())).collect();
    if !r.is_empty() {
        out.csv("phi.csv", &["r", "phi"], r.iter().zip(&phi).map(|(a, b)| vec![num(*a), num(*b)]))?;
    }
    if !k.is_empty() {
        out.csv("phi_hat.csv", &["k", "phi_hat"], k.iter().zip(&phi_hat).map(|(a, b)| vec![num(*a), num(*b)]))?;
    }
    let result = json!({"r": r, "phi": phi, "k": k, "phi_hat": phi_hat});
    Outcome::new(&json!({"r": r, "k": k}), &result, None)
}

fn tabulate(params: TabulateArgs, potential: &PairPotential, out: &mut Output) -> Result<Outcome, CliError> {
    let k0 = potential.cutoff();
    let r_max = params.r_max.unwrap_or(40.0 / k0);
    let points = params.points.unwrap_or(1001);
    if !(r_max.is_finite() && r_max > 0.0) || points < 2 {
        return Err(CliError::Usage("need r_max > 0 and at least two points".into()));
    }
    let grid = |hi: f64| (0..points).map(move |i| hi * i as f64 / (points - 1) as f64);
    let phi: Vec<(f64, f64)> = grid(r_max).map(|r| (r, potential.eval_phi(r))).collect();
    let phi_hat: Vec<(f64, f64)> = grid(k0).map(|k| (k, potential.phi_hat(k))).collect();
    out.csv("phi.csv", &["r", "phi"], phi.iter().map(|(a, b)| vec![num(*a), num(*b)]))?;
    out.csv("phi_hat.csv", &["k", "phi_hat"], phi_hat.iter().map(|(a, b)| vec![num(*a), num(*b)]))?;
    let min_phi = phi.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let result = json!({
        "points": points,
        "r_max": r_max,
        "cutoff": k0,
        "phi_at_zero": potential.phi_at_zero(),
        "phi_hat_at_zero": potential.phi_hat_at_zero(),
        "min_phi": min_phi,
    });
    Outcome::new(&json!({"r_max": r_max, "points": points}), &result, None)
}
