//! Run configuration: a JSON file whose values are overridden by flags.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gsc_core::fixtures;
use gsc_core::lattice::{threshold_density, LatticeName, LatticeSpec, PeriodCell, PeriodicConfiguration};
use gsc_core::spectral::{PairPotential, ProfileSpec, SpectralProfile};
use nalgebra::Matrix3;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

pub const DEFAULT_CUTOFF: f64 = 2.0 * PI;
pub const DEFAULT_OUTPUT_DIR: &str = "gsc-out";

/// Where a spectral profile comes from. Exactly one of `fixture`, `file` and
/// `spec` must be set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSource {
    /// `mollified`, `longrange`, `triangle`, `shell` or `bump`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<ProfileSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    /// Inner edge of the `shell` fixture as a fraction of the cutoff.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<f64>,
}

/// Where a periodic configuration comes from, and how it is scaled.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSource {
    /// Named lattice, e.g. `bcc`, `hcp(1.6)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<LatticeSpec>,
    /// Use the cubic cell with centring offsets for bcc and fcc.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub conventional: bool,
    /// Lattice constant of a named lattice.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    /// Row-major `d x d` matrix applied to generators and offsets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deformation: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
    /// Density as a multiple of the lattice's threshold density.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold_multiple: Option<f64>,
}

/// Keys shared by every command; `params` holds the command's own settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeSource>,
    /// Cutoff `K0` for commands that take no profile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multipliers: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub params: Map<String, Value>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// Command parameters: file values overridden by the non-null flag values.
    pub fn params<P: DeserializeOwned, F: Serialize>(&self, flags: &F) -> Result<P, CliError> {
        let mut merged = self.params.clone();
        if let Value::Object(m) = serde_json::to_value(flags).map_err(|e| CliError::Usage(e.to_string()))? {
            for (k, v) in m {
                if !v.is_null() {
                    merged.insert(k, v);
                }
            }
        }
        serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Usage(format!("params: {e}")))
    }

    pub fn profile_source(&self) -> Result<&ProfileSource, CliError> {
        self.profile
            .as_ref()
            .ok_or_else(|| CliError::Usage("no profile given (use --profile or a config file)".into()))
    }

    pub fn lattice_source(&self) -> Result<&LatticeSource, CliError> {
        self.lattice
            .as_ref()
            .ok_or_else(|| CliError::Usage("no lattice given (use --lattice or a config file)".into()))
    }

    pub fn potential(&self) -> Result<PairPotential, CliError> {
        self.profile_source()?.potential()
    }

    /// Cutoff of the configured profile, or the default when none is set.
    pub fn cutoff(&self) -> Result<f64, CliError> {
        match &self.profile {
            Some(p) => p.cutoff(),
            None => Ok(self.cutoff.unwrap_or(DEFAULT_CUTOFF)),
        }
    }

    pub fn configuration(&self, k0: f64) -> Result<PeriodicConfiguration, CliError> {
        self.lattice_source()?.configuration(k0)
    }

    pub fn cell(&self, config: &PeriodicConfiguration, default: usize) -> Result<PeriodCell, CliError> {
        let d = config.dimension();
        let m = self.multipliers.clone().unwrap_or_else(|| vec![default; d]);
        Ok(PeriodCell::new(config.basis().clone(), &m)?)
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn exactly_one(what: &str, set: &[bool]) -> Result<(), CliError> {
    match set.iter().filter(|b| **b).count() {
        1 => Ok(()),
        0 => Err(CliError::Usage(format!("{what}: nothing to build from"))),
        _ => Err(CliError::Usage(format!("{what}: give only one source"))),
    }
}

impl ProfileSource {
    /// `--profile` value: an existing file, otherwise a fixture name.
    pub fn from_flag(value: &str) -> ProfileSource {
        if Path::new(value).is_file() || value.ends_with(".json") {
            ProfileSource {
                file: Some(PathBuf::from(value)),
                ..Default::default()
            }
        } else {
            ProfileSource {
                fixture: Some(value.to_string()),
                ..Default::default()
            }
        }
    }

    fn load_spec(&self) -> Result<Option<ProfileSpec>, CliError> {
        exactly_one("profile", &[self.fixture.is_some(), self.file.is_some(), self.spec.is_some()])?;
        if let Some(path) = &self.file {
            return Ok(Some(read_json(path)?));
        }
        Ok(self.spec.clone())
    }

    pub fn cutoff(&self) -> Result<f64, CliError> {
        Ok(match self.load_spec()? {
            Some(spec) => spec.cutoff,
            None => self.cutoff.unwrap_or(DEFAULT_CUTOFF),
        })
    }

    pub fn profile(&self) -> Result<SpectralProfile, CliError> {
        if let Some(spec) = self.load_spec()? {
            return Ok(spec.build()?);
        }
        let fixture = self.fixture.as_deref().expect("checked");
        let k0 = self.cutoff.unwrap_or(DEFAULT_CUTOFF);
        let d = self.dimension;
        let profile = match fixture {
            "mollified" => fixtures::mollified_test_profile(d.unwrap_or(3), k0)?,
            "longrange" => {
                if d.is_some_and(|d| d != 3) {
                    return Err(CliError::Usage("the longrange fixture is three-dimensional".into()));
                }
                SpectralProfile::longrange_example(k0)?
            }
            "triangle" => {
                if d.is_some_and(|d| d != 1) {
                    return Err(CliError::Usage("the triangle fixture is one-dimensional".into()));
                }
                SpectralProfile::triangle_1d(k0)?
            }
            "shell" => fixtures::shell_profile(d.unwrap_or(3), k0, self.inner.unwrap_or(0.85))?,
            "bump" => SpectralProfile::bump(d.unwrap_or(3), k0, 1.0)?,
            other => return Err(CliError::Usage(format!("unknown profile fixture {other:?}"))),
        };
        Ok(profile)
    }

    pub fn potential(&self) -> Result<PairPotential, CliError> {
        Ok(PairPotential::new(self.profile()?))
    }
}

impl LatticeSource {
    /// `--lattice` value: an existing file, otherwise a lattice name.
    pub fn from_flag(value: &str) -> LatticeSource {
        if Path::new(value).is_file() || value.ends_with(".json") {
            LatticeSource {
                file: Some(PathBuf::from(value)),
                ..Default::default()
            }
        } else {
            LatticeSource {
                name: Some(value.to_string()),
                ..Default::default()
            }
        }
    }

    /// The unscaled configuration and the one whose lattice defines the
    /// threshold density.
    fn base(&self) -> Result<(PeriodicConfiguration, PeriodicConfiguration), CliError> {
        exactly_one("lattice", &[self.name.is_some(), self.file.is_some(), self.spec.is_some()])?;
        if let Some(name) = &self.name {
            let n = LatticeName::from_str(name)?;
            let a = self.constant.unwrap_or(1.0);
            let config = if self.conventional { n.conventional(a)? } else { n.configuration(a)? };
            return Ok((config, n.configuration(a)?));
        }
        if self.conventional || self.constant.is_some() {
            return Err(CliError::Usage("conventional and constant apply to named lattices only".into()));
        }
        let spec: LatticeSpec = match &self.file {
            Some(path) => read_json(path)?,
            None => self.spec.clone().expect("checked"),
        };
        let config = PeriodicConfiguration::from_spec(&spec)?;
        Ok((config.clone(), config))
    }

    pub fn configuration(&self, k0: f64) -> Result<PeriodicConfiguration, CliError> {
        let (mut config, mut primitive) = self.base()?;
        if let Some(rows) = &self.deformation {
            let d = config.dimension();
            if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                return Err(CliError::Usage(format!("deformation must be {d} x {d}")));
            }
            let mut m = Matrix3::identity();
            for (i, r) in rows.iter().enumerate() {
                for (j, v) in r.iter().enumerate() {
                    m[(i, j)] = *v;
                }
            }
            config = config.transformed(&m)?;
            primitive = primitive.transformed(&m)?;
        }
        let target = match (self.density, self.threshold_multiple) {
            (Some(_), Some(_)) => {
                return Err(CliError::Usage("give density or threshold_multiple, not both".into()));
            }
            (Some(rho), None) => Some(rho),
            (None, Some(s)) => Some(s * threshold_density(&primitive, k0)?),
            (None, None) => None,
        };
        Ok(match target {
            Some(rho) => config.scale_to_density(rho)?,
            None => config,
        })
    }
}
