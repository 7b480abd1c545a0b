//! Numerical search for the least dense Bravais lattice whose shortest
//! reciprocal vector has length `K0`.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::named::LatticeName;
use super::reduce::{enumerate_ball, shortest_vector};
use super::{LatticeBasis, PeriodicConfiguration};
use crate::error::{Error, Result};
use crate::numerics::nelder_mead;

const RESTARTS: usize = 64;
const POLISH_ROUNDS: usize = 40;
const SHELL_COMPARISON_COUNT: usize = 24;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimalBravais {
    pub dimension: usize,
    pub cutoff: f64,
    /// Name of the named lattice whose reciprocal shells best match the winner.
    pub lattice: String,
    pub density: f64,
    pub expected_lattice: String,
    pub expected_density: f64,
    pub relative_error: f64,
    pub shell_mismatch: f64,
    pub matches_expected: bool,
    /// Winning direct generators, scaled so that `q_{B*} = cutoff`.
    pub generators: Vec<Vec<f64>>,
    pub restarts: usize,
}

fn lower_triangular(d: usize, p: &[f64]) -> Matrix3<f64> {
    let mut m = Matrix3::identity();
    let mut idx = 0;
    for i in 0..d {
        for j in 0..=i {
            m[(i, j)] = p[idx];
            idx += 1;
        }
    }
    m
}

/// Density of the direct lattice after rescaling to `q = k0`; the reciprocal
/// generators are the rows of `rows`.
fn normalized_density(d: usize, rows: &Matrix3<f64>, k0: f64) -> f64 {
    let det = rows.determinant().abs();
    let norms: f64 = (0..d).map(|i| rows.row(i).norm()).product();
    if !(det > 1e-8 * norms) {
        return f64::INFINITY;
    }
    let (q, _) = shortest_vector(d, rows);
    det * (k0 / q).powi(d as i32) / (2.0 * PI).powi(d as i32)
}

fn sorted_norms(d: usize, rows: &Matrix3<f64>, count: usize) -> Vec<f64> {
    let (q, _) = shortest_vector(d, rows);
    let mut radius = 2.0 * q;
    loop {
        let pts = enumerate_ball(d, rows, radius);
        if pts.len() > count {
            return pts.iter().skip(1).take(count).map(|p| p.norm / q).collect();
        }
        radius *= 1.5;
    }
}

/// Minimize `rho(B)` over Bravais lattices with `q_{B*} = k0` by a
/// multi-start simplex search over Cholesky factors of the reciprocal Gram
/// matrix, then identify the winner against the named lattices.
pub fn minimal_bravais_check(d: usize, k0: f64, seed: u64) -> Result<MinimalBravais> {
    if !(1..=3).contains(&d) {
        return Err(Error::InvalidParameter(format!("dimension must be 1, 2 or 3, got {d}")));
    }
    if !(k0.is_finite() && k0 > 0.0) {
        return Err(Error::InvalidParameter(format!("cutoff must be positive, got {k0}")));
    }
    let n = d * (d + 1) / 2;
    let objective = |p: &[f64]| normalized_density(d, &lower_triangular(d, p), k0);

    let results: Vec<(f64, Vec<f64>)> = (0..RESTARTS)
        .into_par_iter()
        .map(|restart| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(restart as u64);
            let mut x: Vec<f64> = Vec::with_capacity(n);
            for i in 0..d {
                for j in 0..=i {
                    x.push(if i == j { rng.random_range(0.5..1.5) } else { rng.random_range(-0.5..0.5) });
                }
            }
            let mut best = objective(&x);
            let mut step = 0.2;
            for _ in 0..POLISH_ROUNDS {
                let r = nelder_mead(objective, &x, step, 1e-15, 4000);
                let improved = r.value < best * (1.0 - 1e-15);
                if r.value <= best {
                    best = r.value;
                    x = r.x;
                }
                // renormalize so the simplex scale stays meaningful
                let rows = lower_triangular(d, &x);
                let (q, _) = shortest_vector(d, &rows);
                x.iter_mut().for_each(|v| *v /= q);
                if !improved {
                    step *= 0.3;
                    if step < 1e-9 {
                        break;
                    }
                }
            }
            (best, x)
        })
        .collect();

    let (density, params) = results
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least one restart");

    let mut rows = lower_triangular(d, &params);
    let (q, _) = shortest_vector(d, &rows);
    rows *= k0 / q;
    for i in d..3 {
        rows.set_row(i, &nalgebra::Vector3::<f64>::ith(i, 1.0).transpose());
    }
    let (q_final, _) = shortest_vector(d, &rows);
    if (q_final - k0).abs() > 1e-9 * k0 {
        return Err(Error::OptimizerFailed(format!(
            "shortest reciprocal vector {q_final} differs from the cutoff {k0}"
        )));
    }
    let reciprocal_winner = rows;
    let direct = {
        let inv = reciprocal_winner.try_inverse().ok_or_else(|| Error::OptimizerFailed("singular winner".into()))?;
        let mut a = 2.0 * PI * inv.transpose();
        for i in d..3 {
            a.set_row(i, &nalgebra::Vector3::<f64>::ith(i, 1.0).transpose());
        }
        LatticeBasis::from_rows(d, a)?
    };

    let winner_norms = sorted_norms(d, &reciprocal_winner, SHELL_COMPARISON_COUNT);
    let mut best_name = String::new();
    let mut best_mismatch = f64::INFINITY;
    for name in LatticeName::all_default().into_iter().filter(|n| n.dimension() == d) {
        let cfg: PeriodicConfiguration = name.configuration(1.0)?;
        if cfg.points_per_cell() != 1 {
            continue;
        }
        let r = cfg.reciprocal()?;
        let norms = sorted_norms(d, r.rows(), SHELL_COMPARISON_COUNT);
        let mismatch = winner_norms
            .iter()
            .zip(&norms)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if mismatch < best_mismatch {
            best_mismatch = mismatch;
            best_name = name.label().to_string();
        }
    }

    let expected = match d {
        1 => LatticeName::Chain,
        2 => LatticeName::Triangular,
        _ => LatticeName::Bcc,
    };
    let expected_density = expected.closed_form_threshold(k0).expect("closed form exists");
    let relative_error = (density - expected_density).abs() / expected_density;
    Ok(MinimalBravais {
        dimension: d,
        cutoff: k0,
        matches_expected: best_name == expected.label() && relative_error <= 1e-6,
        lattice: best_name,
        density,
        expected_lattice: expected.label().to_string(),
        expected_density,
        relative_error,
        shell_mismatch: best_mismatch,
        generators: direct.generators(),
        restarts: RESTARTS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_and_two_dimensions() {
        let k0 = 2.0 * PI;
        let r1 = minimal_bravais_check(1, k0, 7).unwrap();
        assert_eq!(r1.lattice, "chain");
        assert!(r1.relative_error < 1e-12);
        let r2 = minimal_bravais_check(2, k0, 7).unwrap();
        assert_eq!(r2.lattice, "triangular");
        assert!(r2.relative_error < 1e-6, "{r2:?}");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(minimal_bravais_check(4, 1.0, 0).is_err());
        assert!(minimal_bravais_check(2, -1.0, 0).is_err());
    }
}
