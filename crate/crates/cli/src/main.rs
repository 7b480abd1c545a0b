//! `gsc`: command-line front end for gsc-core.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use commands::{energy, lattice, optimize, potential, thermo, verify, Outcome};
use config::{LatticeSource, ProfileSource, RunConfig};
use output::Output;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, schema violations, missing files: exit status 2.
    Usage(String),
    /// Computation errors: exit status 1.
    Failure(String),
}

impl From<gsc_core::Error> for CliError {
    fn from(e: gsc_core::Error) -> Self {
        use gsc_core::Error::*;
        match e {
            InvalidParameter(_) | InvalidProfile(_) | UnknownLattice(_) | DegenerateBasis(_) | Json(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Failure(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "gsc", version, about = "Ground states of band-limited pair potentials")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    group: Group,
}

#[derive(Args)]
struct Global {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores, or RAYON_NUM_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Profile fixture (mollified, longrange, triangle, shell, bump) or JSON file.
    #[arg(long, global = true)]
    profile: Option<String>,
    /// Cutoff K0 for fixture profiles and profile-free commands.
    #[arg(long, global = true)]
    k0: Option<f64>,
    /// Dimension of fixture profiles.
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Lattice name (e.g. bcc, hcp(1.6)) or JSON file.
    #[arg(long, global = true)]
    lattice: Option<String>,
    #[arg(long, global = true)]
    density: Option<f64>,
    /// Density as a multiple of the lattice's threshold density.
    #[arg(long, global = true)]
    threshold_multiple: Option<f64>,
    /// Lattice constant of a named lattice.
    #[arg(long, global = true)]
    constant: Option<f64>,
    /// Cubic cell with centring offsets for bcc and fcc.
    #[arg(long, global = true)]
    conventional: bool,
    /// Cell multipliers, e.g. 2,2,2.
    #[arg(long, global = true, value_delimiter = ',')]
    multipliers: Option<Vec<usize>>,
}

#[derive(Subcommand)]
enum Group {
    /// Spectral profiles and pair potentials.
    Potential {
        #[command(subcommand)]
        cmd: potential::Cmd,
    },
    /// Lattice geometry and threshold densities.
    Lattice {
        #[command(subcommand)]
        cmd: lattice::Cmd,
    },
    /// Reciprocal-space energies and fields.
    Energy {
        #[command(subcommand)]
        cmd: energy::Cmd,
    },
    /// Randomized and windowed ground-state checks.
    Verify {
        #[command(subcommand)]
        cmd: verify::Cmd,
    },
    /// Direct minimization of the periodized energy.
    Optimize {
        #[command(subcommand)]
        cmd: optimize::Cmd,
    },
    /// Canonical and grand-canonical energy densities.
    Thermo {
        #[command(subcommand)]
        cmd: thermo::Cmd,
    },
}

fn resolve_config(g: &Global) -> Result<RunConfig, CliError> {
    let mut config = match &g.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &g.profile {
        config.profile = Some(ProfileSource::from_flag(p));
    }
    if let Some(k0) = g.k0 {
        if !(k0.is_finite() && k0 > 0.0) {
            return Err(CliError::Usage(format!("--k0 must be positive, got {k0}")));
        }
        config.cutoff = Some(k0);
    }
    if let Some(p) = config.profile.as_mut() {
        if p.fixture.is_some() {
            if let Some(k0) = g.k0 {
                p.cutoff = Some(k0);
            }
            if let Some(d) = g.dim {
                p.dimension = Some(d);
            }
        } else if g.k0.is_some() || g.dim.is_some() {
            return Err(CliError::Usage("--k0 and --dim apply to fixture profiles only".into()));
        }
    }
    if let Some(l) = &g.lattice {
        config.lattice = Some(LatticeSource::from_flag(l));
    }
    let scaling = g.density.is_some() || g.threshold_multiple.is_some() || g.constant.is_some() || g.conventional;
    if scaling {
        let l = config
            .lattice
            .as_mut()
            .ok_or_else(|| CliError::Usage("lattice scaling flags need a lattice".into()))?;
        if g.density.is_some() || g.threshold_multiple.is_some() {
            l.density = g.density;
            l.threshold_multiple = g.threshold_multiple;
        }
        if g.constant.is_some() {
            l.constant = g.constant;
        }
        if g.conventional {
            l.conventional = true;
        }
    }
    if g.multipliers.is_some() {
        config.multipliers = g.multipliers.clone();
    }
    if g.seed.is_some() {
        config.seed = g.seed;
    }
    if g.output_dir.is_some() {
        config.output_dir = g.output_dir.clone();
    }
    if g.threads.is_some() {
        config.threads = g.threads;
    }
    Ok(config)
}

fn run(cli: Cli, argv: &[String]) -> Result<bool, CliError> {
    let config = resolve_config(&cli.global)?;
    if let Some(t) = config.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Failure(e.to_string()))?;
    }
    let mut out = Output::create(&config.output_dir())?;
    let (name, outcome): (String, Outcome) = match &cli.group {
        Group::Potential { cmd } => (format!("potential {}", cmd.name()), potential::run(cmd, &config, &mut out)?),
        Group::Lattice { cmd } => (format!("lattice {}", cmd.name()), lattice::run(cmd, &config, &mut out)?),
        Group::Energy { cmd } => (format!("energy {}", cmd.name()), energy::run(cmd, &config, &mut out)?),
        Group::Verify { cmd } => (format!("verify {}", cmd.name()), verify::run(cmd, &config, &mut out)?),
        Group::Optimize { cmd } => (format!("optimize {}", cmd.name()), optimize::run(cmd, &config, &mut out)?),
        Group::Thermo { cmd } => (format!("thermo {}", cmd.name()), thermo::run(cmd, &config, &mut out)?),
    };
    let mut recorded = config.clone();
    recorded.output_dir = None;
    recorded.threads = None;
    let summary = json!({
        "command": name,
        "seed": config.seed(),
        "config": recorded,
        "params": outcome.params,
        "passed": outcome.passed,
        "result": outcome.result,
    });
    out.finish(&summary, argv, &config.output_dir())?;
    println!("{}", serde_json::to_string_pretty(&summary).map_err(|e| CliError::Failure(e.to_string()))?);
    Ok(outcome.passed != Some(false))
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli, &argv) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("gsc: check failed");
            ExitCode::from(1)
        }
        Err(CliError::Usage(m)) => {
            eprintln!("gsc: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Failure(m)) => {
            eprintln!("gsc: {m}");
            ExitCode::from(1)
        }
    }
}
