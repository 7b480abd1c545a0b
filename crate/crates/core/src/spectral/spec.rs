//! JSON profile definitions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ProfileKind, SpectralProfile};
use crate::error::{Error, Result};

/// Serializable description of a spectral profile.
///
/// ```json
/// {"dimension": 3, "cutoff": 6.283185307179586,
///  "kind": "factored", "scale": 9.869604401089358,
///  "roots": [[-0.628, -1.885], [-0.628, 1.885], [6.283, 0.0], [6.283, 0.0]]}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub dimension: usize,
    pub cutoff: f64,
    #[serde(flatten)]
    pub kind: KindSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KindSpec {
    /// Ascending coefficients in `k`.
    Polynomial { coeffs: Vec<f64> },
    /// Three-dimensional long-range polynomial with the endpoint double root enforced.
    Longrange { coeffs: Vec<f64> },
    /// `scale * prod (k - root)`, roots as `[re, im]`; must satisfy the long-range constraints.
    Factored { scale: f64, roots: Vec<[f64; 2]> },
    Piecewise { knots: Vec<f64>, pieces: Vec<Vec<f64>> },
    Bump { amplitude: f64 },
    /// `base` must have `cutoff <= self.cutoff - epsilon` and the same dimension.
    Mollified { epsilon: f64, base: Box<ProfileSpec> },
    /// Uniform samples over `[0, cutoff]`.
    Tabulated { values: Vec<f64> },
}

impl ProfileSpec {
    pub fn build(&self) -> Result<SpectralProfile> {
        let d = self.dimension;
        let k0 = self.cutoff;
        match &self.kind {
            KindSpec::Polynomial { coeffs } => SpectralProfile::polynomial(d, k0, coeffs.clone()),
            KindSpec::Longrange { coeffs } => {
                require_3d(d)?;
                SpectralProfile::build_longrange_3d(coeffs.clone(), k0)
            }
            KindSpec::Factored { scale, roots } => {
                require_3d(d)?;
                let roots: Vec<Complex64> =
                    roots.iter().map(|r| Complex64::new(r[0], r[1])).collect();
                SpectralProfile::longrange_from_roots(*scale, &roots, k0)
            }
            KindSpec::Piecewise { knots, pieces } => {
                let p = SpectralProfile::piecewise(d, knots.clone(), pieces.clone())?;
                if (p.cutoff() - k0).abs() > 1e-12 * k0 {
                    return Err(Error::InvalidProfile(
                        "last knot must equal the cutoff".into(),
                    ));
                }
                Ok(p)
            }
            KindSpec::Bump { amplitude } => SpectralProfile::bump(d, k0, *amplitude),
            KindSpec::Mollified { epsilon, base } => {
                if base.dimension != d {
                    return Err(Error::InvalidProfile(
                        "mollified base must have the same dimension".into(),
                    ));
                }
                SpectralProfile::build_mollified(&base.build()?, *epsilon, k0)
            }
            KindSpec::Tabulated { values } => SpectralProfile::tabulated(d, k0, values.clone()),
        }
    }

    pub fn from_json(text: &str) -> Result<ProfileSpec> {
        Ok(serde_json::from_str(text)?)
    }
}

fn require_3d(d: usize) -> Result<()> {
    if d == 3 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(
            "long-range polynomial profiles are three-dimensional".into(),
        ))
    }
}

impl SpectralProfile {
    /// Definition that rebuilds this profile.
    pub fn to_spec(&self) -> ProfileSpec {
        let kind = match self.kind() {
            ProfileKind::Polynomial { coeffs } => KindSpec::Polynomial {
                coeffs: coeffs.clone(),
            },
            ProfileKind::Piecewise { knots, pieces } => KindSpec::Piecewise {
                knots: knots.clone(),
                pieces: pieces.clone(),
            },
            ProfileKind::Bump { amplitude } => KindSpec::Bump {
                amplitude: *amplitude,
            },
            ProfileKind::Mollified { epsilon, base, .. } => KindSpec::Mollified {
                epsilon: *epsilon,
                base: Box::new(base.to_spec()),
            },
            ProfileKind::Tabulated { table } => KindSpec::Tabulated {
                values: table.values().to_vec(),
            },
        };
        ProfileSpec {
            dimension: self.dimension(),
            cutoff: self.cutoff(),
            kind,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn factored_definition_builds_the_worked_example() {
        let k0 = 2.0 * PI;
        let text = format!(
            r#"{{"dimension": 3, "cutoff": {k0}, "kind": "factored", "scale": {s},
                "roots": [[{a}, {b}], [{a}, {nb}], [{k0}, 0.0], [{k0}, 0.0]]}}"#,
            s = PI * PI,
            a = -k0 / 10.0,
            b = -0.3 * k0,
            nb = 0.3 * k0
        );
        let p = ProfileSpec::from_json(&text).unwrap().build().unwrap();
        let reference = SpectralProfile::longrange_example(k0).unwrap();
        for i in 0..10 {
            let k = 0.1 * k0 * i as f64;
            assert!((p.eval_phi_hat(k) - reference.eval_phi_hat(k)).abs() < 1e-9);
        }
    }

    #[test]
    fn nested_mollified_definition() {
        let text = r#"{"dimension": 1, "cutoff": 1.0, "kind": "mollified", "epsilon": 0.5,
                       "base": {"dimension": 1, "cutoff": 0.5, "kind": "polynomial", "coeffs": [1.0]}}"#;
        let spec = ProfileSpec::from_json(text).unwrap();
        let p = spec.build().unwrap();
        assert!(p.eval_phi_hat(0.99) > 0.0);
        assert_eq!(p.to_spec(), spec);
    }

    #[test]
    fn schema_errors_are_reported() {
        assert!(ProfileSpec::from_json(r#"{"dimension": 3, "cutoff": 1.0, "kind": "nope"}"#).is_err());
        let wrong_dim = r#"{"dimension": 2, "cutoff": 1.0, "kind": "longrange", "coeffs": [1.0, -2.0, 1.0]}"#;
        assert!(ProfileSpec::from_json(wrong_dim).unwrap().build().is_err());
    }
}
