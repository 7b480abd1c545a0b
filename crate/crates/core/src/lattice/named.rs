//! Conventional lattices and their threshold densities.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{LatticeBasis, PeriodicConfiguration};
use crate::error::{Error, Result};

/// `c/a` minimizing the simple-hexagonal threshold.
pub const SH_OPTIMAL_C_OVER_A: f64 = 0.866_025_403_784_438_6;

/// Ideal close-packing ratio `sqrt(8/3)`.
pub const HCP_IDEAL_C_OVER_A: f64 = 1.632_993_161_855_452;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LatticeName {
    Chain,
    Square,
    Triangular,
    Sc,
    Bcc,
    Fcc,
    Sh { c_over_a: f64 },
    Hcp { c_over_a: f64 },
}

impl LatticeName {
    pub fn all_default() -> Vec<LatticeName> {
        vec![
            LatticeName::Chain,
            LatticeName::Square,
            LatticeName::Triangular,
            LatticeName::Bcc,
            LatticeName::Fcc,
            LatticeName::Sh { c_over_a: SH_OPTIMAL_C_OVER_A },
            LatticeName::Sc,
            LatticeName::Hcp { c_over_a: HCP_IDEAL_C_OVER_A },
        ]
    }

    pub fn dimension(&self) -> usize {
        match self {
            LatticeName::Chain => 1,
            LatticeName::Square | LatticeName::Triangular => 2,
            _ => 3,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            LatticeName::Chain => "chain",
            LatticeName::Square => "square",
            LatticeName::Triangular => "triangular",
            LatticeName::Sc => "sc",
            LatticeName::Bcc => "bcc",
            LatticeName::Fcc => "fcc",
            LatticeName::Sh { .. } => "sh",
            LatticeName::Hcp { .. } => "hcp",
        }
    }

    /// Conventional lattice with lattice constant `a`. bcc and fcc use
    /// primitive generators of the cubic cell of side `a`; hcp has `J = 2`.
    pub fn configuration(&self, a: f64) -> Result<PeriodicConfiguration> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidParameter(format!("lattice constant must be positive, got {a}")));
        }
        let h = a / 2.0;
        let s3 = 3f64.sqrt() / 2.0;
        let gens: Vec<Vec<f64>> = match *self {
            LatticeName::Chain => vec![vec![a]],
            LatticeName::Square => vec![vec![a, 0.0], vec![0.0, a]],
            LatticeName::Triangular => vec![vec![a, 0.0], vec![h, s3 * a]],
            LatticeName::Sc => vec![vec![a, 0.0, 0.0], vec![0.0, a, 0.0], vec![0.0, 0.0, a]],
            LatticeName::Bcc => vec![vec![h, h, -h], vec![-h, h, h], vec![h, -h, h]],
            LatticeName::Fcc => vec![vec![0.0, h, h], vec![h, 0.0, h], vec![h, h, 0.0]],
            LatticeName::Sh { c_over_a } | LatticeName::Hcp { c_over_a } => {
                if !(c_over_a.is_finite() && c_over_a > 0.0) {
                    return Err(Error::InvalidParameter(format!("c/a must be positive, got {c_over_a}")));
                }
                vec![vec![a, 0.0, 0.0], vec![h, s3 * a, 0.0], vec![0.0, 0.0, c_over_a * a]]
            }
        };
        let basis = LatticeBasis::new(&gens)?;
        let config = match self {
            LatticeName::Hcp { .. } => PeriodicConfiguration::from_fractional(
                basis,
                &[Vector3::zeros(), Vector3::new(1.0 / 3.0, 1.0 / 3.0, 0.5)],
            )?,
            _ => PeriodicConfiguration::bravais(basis),
        };
        Ok(config.with_name(Some(self.to_string())))
    }

    /// Cubic cell of side `a` with the centring points as offsets: two points
    /// for bcc, four for fcc. Other lattices are returned unchanged.
    pub fn conventional(&self, a: f64) -> Result<PeriodicConfiguration> {
        let offsets: Vec<Vector3<f64>> = match self {
            LatticeName::Bcc => vec![Vector3::zeros(), Vector3::new(0.5, 0.5, 0.5)],
            LatticeName::Fcc => vec![
                Vector3::zeros(),
                Vector3::new(0.0, 0.5, 0.5),
                Vector3::new(0.5, 0.0, 0.5),
                Vector3::new(0.5, 0.5, 0.0),
            ],
            _ => return self.configuration(a),
        };
        let basis = LatticeName::Sc.configuration(a)?.basis().clone();
        Ok(PeriodicConfiguration::from_fractional(basis, &offsets)?.with_name(Some(format!("{self}-cubic"))))
    }

    /// Closed-form threshold density at cutoff `k0`.
    pub fn closed_form_threshold(&self, k0: f64) -> Option<f64> {
        let x = k0 / PI;
        let s3 = 3f64.sqrt();
        match *self {
            LatticeName::Chain => Some(k0 / (2.0 * PI)),
            LatticeName::Triangular => Some(s3 / 8.0 * x * x),
            LatticeName::Square => Some(x * x / 4.0),
            LatticeName::Bcc => Some(x.powi(3) / (8.0 * 2f64.sqrt())),
            LatticeName::Fcc => Some(x.powi(3) / (6.0 * s3)),
            LatticeName::Sc => Some(x.powi(3) / 8.0),
            LatticeName::Sh { c_over_a } if (c_over_a - SH_OPTIMAL_C_OVER_A).abs() < 1e-12 => {
                Some(s3 / 16.0 * x.powi(3))
            }
            LatticeName::Hcp { c_over_a } if (c_over_a - HCP_IDEAL_C_OVER_A).abs() < 1e-12 => {
                Some(4.0 / (3.0 * s3) * x.powi(3))
            }
            _ => None,
        }
    }

    /// Density of this lattice scaled until `q_{B*} = k0`.
    pub fn computed_threshold(&self, k0: f64) -> Result<f64> {
        threshold_density(&self.configuration(1.0)?, k0)
    }
}

/// Density of `config` after dilation to `q_{B*} = k0`.
pub fn threshold_density(config: &PeriodicConfiguration, k0: f64) -> Result<f64> {
    let q = config.reciprocal()?.shortest_norm();
    Ok(config.density() * (k0 / q).powi(config.dimension() as i32))
}

impl fmt::Display for LatticeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatticeName::Sh { c_over_a } | LatticeName::Hcp { c_over_a } => {
                write!(f, "{}({})", self.label(), c_over_a)
            }
            _ => f.write_str(self.label()),
        }
    }
}

impl FromStr for LatticeName {
    type Err = Error;

    /// `chain`, `square`, `triangular`, `sc`, `bcc`, `fcc`, `sh`, `hcp`,
    /// optionally `sh(0.9)` / `hcp(1.6)` or `sh:0.9` with an explicit `c/a`.
    fn from_str(s: &str) -> Result<LatticeName> {
        let s = s.trim().to_ascii_lowercase();
        let (head, ratio) = match s.find(['(', ':']) {
            Some(i) => {
                let tail = s[i + 1..].trim_end_matches(')');
                let r: f64 = tail
                    .parse()
                    .map_err(|_| Error::UnknownLattice(format!("bad c/a in {s:?}")))?;
                (&s[..i], Some(r))
            }
            None => (s.as_str(), None),
        };
        let plain = |n: LatticeName| {
            if ratio.is_some() {
                Err(Error::UnknownLattice(format!("{head} takes no c/a")))
            } else {
                Ok(n)
            }
        };
        match head {
            "chain" => plain(LatticeName::Chain),
            "square" => plain(LatticeName::Square),
            "triangular" => plain(LatticeName::Triangular),
            "sc" => plain(LatticeName::Sc),
            "bcc" => plain(LatticeName::Bcc),
            "fcc" => plain(LatticeName::Fcc),
            "sh" => Ok(LatticeName::Sh {
                c_over_a: ratio.unwrap_or(SH_OPTIMAL_C_OVER_A),
            }),
            "hcp" => Ok(LatticeName::Hcp {
                c_over_a: ratio.unwrap_or(HCP_IDEAL_C_OVER_A),
            }),
            _ => Err(Error::UnknownLattice(s.clone())),
        }
    }
}

/// One row of the threshold table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub name: String,
    pub dimension: usize,
    pub closed_form: Option<f64>,
    pub computed: f64,
    pub relative_difference: Option<f64>,
    /// `rho q^{-d}` for this lattice shape.
    pub shape_constant: f64,
}

/// Threshold densities of every named lattice at cutoff `k0`.
pub fn threshold_table(k0: f64) -> Result<Vec<ThresholdRow>> {
    LatticeName::all_default()
        .into_iter()
        .map(|n| {
            let computed = n.computed_threshold(k0)?;
            let closed = n.closed_form_threshold(k0);
            Ok(ThresholdRow {
                name: n.label().to_string(),
                dimension: n.dimension(),
                closed_form: closed,
                computed,
                relative_difference: closed.map(|c| (computed - c).abs() / c),
                shape_constant: computed / k0.powi(n.dimension() as i32),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const K0: f64 = 2.0 * PI;

    #[test]
    fn conventional_cells_have_the_primitive_density() {
        for name in [LatticeName::Bcc, LatticeName::Fcc, LatticeName::Sc] {
            let a = name.configuration(1.7).unwrap();
            let c = name.conventional(1.7).unwrap();
            assert!((a.density() - c.density()).abs() < 1e-14 * a.density());
        }
        assert_eq!(LatticeName::Bcc.conventional(1.0).unwrap().points_per_cell(), 2);
        assert_eq!(LatticeName::Fcc.conventional(1.0).unwrap().points_per_cell(), 4);
    }

    #[test]
    fn ideal_ratios() {
        assert!((SH_OPTIMAL_C_OVER_A - 3f64.sqrt() / 2.0).abs() < 1e-16);
        assert!((HCP_IDEAL_C_OVER_A - (8.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn thresholds_at_two_pi() {
        let expect = [
            (LatticeName::Bcc, 1.0 / 2f64.sqrt()),
            (LatticeName::Fcc, 8.0 / (6.0 * 3f64.sqrt())),
            (LatticeName::Sc, 1.0),
            (LatticeName::Hcp { c_over_a: HCP_IDEAL_C_OVER_A }, 32.0 / (3.0 * 3f64.sqrt())),
            (LatticeName::Chain, 1.0),
            (LatticeName::Triangular, 3f64.sqrt() / 2.0),
        ];
        for (n, v) in expect {
            let c = n.computed_threshold(K0).unwrap();
            assert!((c - v).abs() < 1e-12 * v, "{n}: {c} vs {v}");
            assert!((n.closed_form_threshold(K0).unwrap() - v).abs() < 1e-14 * v);
        }
    }

    #[test]
    fn named_densities() {
        let tri = LatticeName::Triangular.configuration(1.0).unwrap();
        assert!((tri.density() - 2.0 / 3f64.sqrt()).abs() < 1e-14);
        let sc = LatticeName::Sc.configuration(1.0).unwrap();
        assert!((sc.density() - 1.0).abs() < 1e-15);
        let c = HCP_IDEAL_C_OVER_A;
        let hcp = LatticeName::Hcp { c_over_a: c }.configuration(1.0).unwrap();
        assert_eq!(hcp.points_per_cell(), 2);
        assert!((hcp.density() - 2.0 / (3f64.sqrt() / 2.0 * c)).abs() < 1e-14);
        assert!((LatticeName::Bcc.configuration(2.0).unwrap().density() - 0.25).abs() < 1e-15);
        assert!((LatticeName::Fcc.configuration(2.0).unwrap().density() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn parse_names() {
        assert_eq!("bcc".parse::<LatticeName>().unwrap(), LatticeName::Bcc);
        assert_eq!("sh(0.9)".parse::<LatticeName>().unwrap(), LatticeName::Sh { c_over_a: 0.9 });
        assert_eq!("HCP:1.5".parse::<LatticeName>().unwrap(), LatticeName::Hcp { c_over_a: 1.5 });
        assert!("diamond".parse::<LatticeName>().is_err());
        assert!("bcc(2)".parse::<LatticeName>().is_err());
    }

    #[test]
    fn printed_hcp_ratio_does_not_reproduce_the_threshold() {
        let literal = LatticeName::Hcp { c_over_a: 8f64.sqrt() / 3.0 };
        let closed = LatticeName::Hcp { c_over_a: HCP_IDEAL_C_OVER_A }.closed_form_threshold(K0).unwrap();
        let c = literal.computed_threshold(K0).unwrap();
        assert!((c - closed).abs() > 0.1 * closed);
    }
}
