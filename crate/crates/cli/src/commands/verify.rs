use clap::{Args, Subcommand};
use gsc_core::lattice::PeriodicConfiguration;
use gsc_core::verify::{
    deformation_scan, global_minimality_check, perturbation_test, union_window_check, uniqueness_at_threshold,
    CompetitorSet, Ensemble, PerturbationSettings, UnionSettings,
};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{spacing, value, Outcome};
use crate::config::{LatticeSource, RunConfig};
use crate::output::{num, nums, Output};
use crate::CliError;

#[derive(Subcommand)]
pub enum Cmd {
    /// Random local perturbations of the configuration in a period cell.
    Perturb(PerturbArgs),
    /// Energies of random volume-preserving deformations.
    Deform(DeformArgs),
    /// Competitors at their threshold densities against the minimal lattice.
    ThresholdUnique(UniqueArgs),
    /// Replace the configuration by a competitor inside growing windows.
    GlobalMin(GlobalArgs),
    /// Field and windowed stability of a union of translated configurations.
    Union(UnionArgs),
}

impl Cmd {
    pub fn name(&self) -> &'static str {
        match self {
            Cmd::Perturb(_) => "perturb",
            Cmd::Deform(_) => "deform",
            Cmd::ThresholdUnique(_) => "threshold-unique",
            Cmd::GlobalMin(_) => "global-min",
            Cmd::Union(_) => "union",
        }
    }
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbArgs {
    /// `canonical` (default) or `grand`.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<String>,
    /// Chemical potential; defaults to the value paired with the density.
    #[arg(long, allow_negative_numbers = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Number of trials (default 10000).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Run even when the configuration violates the stability hypotheses.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allow_violations: Option<bool>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeformArgs {
    /// Number of samples, the first being the identity (default 200).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Standard deviation of each walk step (default 0.05).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniqueArgs {
    /// Random Bravais competitors (default 20).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_bravais: Option<usize>,
    /// Random two-point competitors (default 5).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_pairs: Option<usize>,
    /// Skip the named competitors.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub no_named: Option<bool>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalArgs {
    /// Lattice placed inside the windows (default fcc).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub competitor: Option<String>,
    /// Window sides in units of rho^(-1/d) (default 5,7,9).
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sides: Option<Vec<f64>>,
    /// Compare equal particle numbers (default true).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub match_counts: Option<bool>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnionArgs {
    /// Window side in units of rho^(-1/d) of the first component (default 4).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<f64>,
    /// Field test points (default 200).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_points: Option<usize>,
    /// Windowed perturbation trials (default 1000).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Components; config file only. Defaults to two copies of the lattice.
    #[arg(skip)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<LatticeSource>>,
    /// Cartesian shift of each component; config file only.
    #[arg(skip)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shifts: Option<Vec<Vec<f64>>>,
}

pub fn run(cmd: &Cmd, config: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    match cmd {
        Cmd::Perturb(args) => perturb(config.params(args)?, config, out),
        Cmd::Deform(args) => deform(config.params(args)?, config, out),
        Cmd::ThresholdUnique(args) => unique(config.params(args)?, config, out),
        Cmd::GlobalMin(args) => global(config.params(args)?, config, out),
        Cmd::Union(args) => union(config.params(args)?, config, out),
    }
}

fn without(mut v: Value, key: &str) -> Value {
    if let Value::Object(m) = &mut v {
        m.remove(key);
    }
    v
}

fn perturb(params: PerturbArgs, config: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let potential = config.potential()?;
    let lattice = config.configuration(potential.cutoff())?;
    let d = lattice.dimension();
    let trials = params.trials.unwrap_or(10_000);
    let ensemble = match params.ensemble.as_deref().unwrap_or("canonical") {
        "canonical" => {
            if params.mu.is_some() {
                return Err(CliError::Usage("mu applies to the grand ensemble only".into()));
            }
            Ensemble::Canonical
        }
        "grand" => Ensemble::Grand {
            mu: params
                .mu
                .unwrap_or(potential.phi_hat_at_zero() * lattice.density() - 0.5 * potential.phi_at_zero()),
        },
        other => return Err(CliError::Usage(format!("unknown ensemble {other:?}"))),
    };
    let multipliers = config.multipliers.clone().unwrap_or_else(|| vec![3; d]);
    let mut settings = PerturbationSettings::new(multipliers, trials, config.seed());
    settings.enforce_hypotheses = !params.allow_violations.unwrap_or(false);
    let report = perturbation_test(&potential, &lattice, ensemble, &settings)?;
    out.json_lines("trials.jsonl", &report.records)?;
    let effective = json!({
        "ensemble": ensemble,
        "trials": trials,
        "multipliers": settings.multipliers,
        "enforce_hypotheses": settings.enforce_hypotheses,
    });
    let passed = report.passed;
    Outcome::new(&effective, &without(value(&report)?, "records"), Some(passed))
}

fn deform(params: DeformArgs, config: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let potential = config.potential()?;
    let lattice = config.configuration(potential.cutoff())?;
    let samples = params.samples.unwrap_or(200);
    let step = params.step.unwrap_or(0.05);
    let report = deformation_scan(&potential, &lattice, samples, step, config.seed())?;
    out.csv(
        "samples.csv",
        &[
            "index",
            "determinant",
            "shortest_reciprocal",
            "admissible",
            "energy_density",
            "plateau",
            "excess",
            "excess_expected",
            "matrix",
        ],
        report.samples.iter().map(|s| {
            let flat: Vec<f64> = s.matrix.iter().flatten().copied().collect();
            vec![
                s.index.to_string(),
                num(s.determinant),
                num(s.shortest_reciprocal),
                s.admissible.to_string(),
                num(s.energy_density),
                num(s.plateau),
                num(s.excess),
                s.excess_expected.to_string(),
                nums(&flat).join(" "),
            ]
        }),
    )?;
    let passed = report.plateau_holds && report.excess_holds;
    Outcome::new(
        &json!({"samples": samples, "step": step}),
        &without(value(&report)?, "samples"),
        Some(passed),
    )
}

fn unique(params: UniqueArgs, config: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let potential = config.potential()?;
    let defaults = CompetitorSet::default();
    let set = CompetitorSet {
        named: !params.no_named.unwrap_or(false),
        random_bravais: params.random_bravais.unwrap_or(defaults.random_bravais),
        random_pairs: params.random_pairs.unwrap_or(defaults.random_pairs),
        seed: config.seed(),
    };
    let report = uniqueness_at_threshold(&potential, &set)?;
    out.csv(
        "competitors.csv",
        &["label", "points_per_cell", "density", "shortest_reciprocal", "energy_density", "gap", "shell_sum"],
        report.competitors.iter().map(|c| {
            vec![
                c.label.clone(),
                c.points_per_cell.to_string(),
                num(c.density),
                num(c.shortest_reciprocal),
                num(c.energy_density),
                num(c.gap),
                num(c.shell_sum),
            ]
        }),
    )?;
    let passed = report.all_exceed_margin;
    Outcome::new(&set, &without(value(&report)?, "competitors"), Some(passed))
}

fn global(params: GlobalArgs, config: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let potential = config.potential()?;
    let x = config.configuration(potential.cutoff())?;
    let d = x.dimension();
    let rho = x.density();
    let name = params.competitor.clone().unwrap_or_else(|| "fcc".into());
    let competitor = LatticeSource::from_flag(&name);
    let y = competitor.configuration(potential.cutoff())?.scale_to_density(rho)?;
    let units = params.sides.clone().unwrap_or_else(|| vec![5.0, 7.0, 9.0]);
    let sides: Vec<f64> = units.iter().map(|s| s * spacing(rho, d)).collect();
    let match_counts = params.match_counts.unwrap_or(true);
    let report = global_minimality_check(&potential, &x, &y, &sides, match_counts)?;
    out.csv(
        "windows.csv",
        &["side", "volume", "surface", "points_x", "points_y", "gap", "gap_per_volume", "error_bound"],
        report.windows.iter().map(|w| {
            vec![
                num(w.side),
                num(w.volume),
                num(w.surface),
                w.points_x.to_string(),
                w.points_y.to_string(),
                num(w.gap),
                num(w.gap_per_volume),
                num(w.error_bound),
            ]
        }),
    )?;
    let effective = json!({"competitor": name, "sides": units, "match_counts": match_counts});
    Outcome::new(&effective, &report, None)
}

fn union(params: UnionArgs, config: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let potential = config.potential()?;
    let k0 = potential.cutoff();
    let configs: Vec<PeriodicConfiguration> = match &params.components {
        Some(list) => list.iter().map(|c| c.configuration(k0)).collect::<Result<_, _>>()?,
        None => {
            let c = config.configuration(k0)?;
            vec![c.clone(), c]
        }
    };
    let d = potential.dimension();
    let shifts: Vec<Vector3<f64>> = match &params.shifts {
        Some(list) => {
            if list.len() != configs.len() || list.iter().any(|s| s.len() != d) {
                return Err(CliError::Usage(format!("shifts: need {} vectors of length {d}", configs.len())));
            }
            list.iter()
                .map(|s| {
                    let mut v = Vector3::zeros();
                    for (c, x) in s.iter().enumerate() {
                        v[c] = *x;
                    }
                    v
                })
                .collect()
        }
        None => configs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if i == 0 {
                    return Vector3::zeros();
                }
                let mut f = Vector3::zeros();
                for a in 0..d {
                    f[a] = [0.5, 0.25, 0.125][a] / i as f64;
                }
                c.basis().to_cartesian(&f)
            })
            .collect(),
    };
    let units = params.side.unwrap_or(4.0);
    let settings = UnionSettings {
        side: units * spacing(configs[0].density(), d),
        field_points: params.field_points.unwrap_or(200),
        trials: params.trials.unwrap_or(1000),
        seed: config.seed(),
        mu: params.mu,
    };
    let components: Vec<(PeriodicConfiguration, Vector3<f64>)> = configs.into_iter().zip(shifts.iter().copied()).collect();
    let report = union_window_check(&potential, &components, &settings)?;
    out.json_lines("trials.jsonl", &report.records)?;
    let effective = json!({
        "side": units,
        "field_points": settings.field_points,
        "trials": settings.trials,
        "mu": report.mu,
        "components": params.components,
        "shifts": shifts.iter().map(|s| gsc_core::lattice::truncate(d, s)).collect::<Vec<_>>(),
    });
    let passed = report.field_constant && report.stable;
    Outcome::new(&effective, &without(value(&report)?, "records"), Some(passed))
}
