//! Truncated real-space sums with tail estimates, used to cross-check the
//! reciprocal-space formulas.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{enumerate_ball, PeriodCell, PeriodicConfiguration};
use crate::numerics::NeumaierSum;
use crate::spectral::{unit_sphere_area, PairPotential};

/// Multiplier applied to every tail estimate, covering the difference
/// between a lattice sum of `|phi|` and its continuum integral.
pub const TAIL_SAFETY_FACTOR: f64 = 2.0;

/// Window, in units of `1/K0`, on which the `1/r^4` slack is fitted.
const SLACK_WINDOW: (f64, f64) = (20.0, 200.0);

/// Samples per wavelength `2 pi / K0` when scanning `|phi|`.
const ENVELOPE_SAMPLES_PER_WAVELENGTH: f64 = 32.0;

/// Bound on `|S^{d-1}| int_{r_cut}^inf |phi(r)| r^{d-1} dr`.
///
/// Three-dimensional long-range polynomial profiles use
/// `|phi| <= (|A| + |C| + slack) / r^4` beyond `20/K0`, with the slack fitted
/// on `[20/K0, 200/K0]`. Other profiles use the sampled upper envelope of
/// `|phi|` over twenty wavelengths beyond `r_cut` and an `r^{-(d+1)}`
/// continuation past that.
pub fn tail_integral(potential: &PairPotential, r_cut: f64) -> f64 {
    let d = potential.dimension();
    let k0 = potential.cutoff();
    let area = unit_sphere_area(d);
    if let (Some(a), Some(c)) = (potential.asymptotic_amplitude(), potential.asymptotic_constant()) {
        let start = SLACK_WINDOW.0 / k0;
        let coefficient = algebraic_coefficient(potential, a.abs() + c.abs());
        // int_R^inf B r^{-4} r^2 dr = B / R
        if r_cut >= start {
            return area * coefficient / r_cut;
        }
        return sampled_integral(potential, r_cut, start) + area * coefficient / start;
    }
    let r_ext = r_cut + 20.0 * 2.0 * PI / k0;
    let (inner, last_max) = sampled_envelope(potential, r_cut, r_ext);
    // int_{R}^inf M (R/r)^{d+1} r^{d-1} dr = M R^d
    inner + area * last_max * r_ext.powi(d as i32)
}

fn algebraic_coefficient(potential: &PairPotential, leading: f64) -> f64 {
    let k0 = potential.cutoff();
    let (lo, hi) = (SLACK_WINDOW.0 / k0, SLACK_WINDOW.1 / k0);
    let step = 2.0 * PI / k0 / ENVELOPE_SAMPLES_PER_WAVELENGTH;
    let n = ((hi - lo) / step).ceil() as usize;
    let worst = (0..=n)
        .into_par_iter()
        .map(|i| {
            let r = lo + i as f64 * step;
            potential.eval_phi(r).abs() * r.powi(4)
        })
        .reduce(|| 0.0, f64::max);
    leading + (worst - leading).max(0.0)
}

fn sampled_integral(potential: &PairPotential, lo: f64, hi: f64) -> f64 {
    sampled_envelope(potential, lo, hi).0
}

/// Integral of the piecewise-constant upper envelope of `|phi| r^{d-1}` on
/// `[lo, hi]`, and the maximum of `|phi|` over the last wavelength.
fn sampled_envelope(potential: &PairPotential, lo: f64, hi: f64) -> (f64, f64) {
    let d = potential.dimension() as i32;
    let k0 = potential.cutoff();
    let wavelength = 2.0 * PI / k0;
    let step = wavelength / ENVELOPE_SAMPLES_PER_WAVELENGTH;
    let n = ((hi - lo) / step).ceil().max(1.0) as usize;
    let values: Vec<f64> = (0..=n)
        .into_par_iter()
        .map(|i| potential.eval_phi(lo + i as f64 * step).abs())
        .collect();
    let mut acc = NeumaierSum::new();
    for i in 0..n {
        let r_hi = lo + (i + 1) as f64 * step;
        acc.add(values[i].max(values[i + 1]) * r_hi.powi(d - 1) * step);
    }
    let last = (ENVELOPE_SAMPLES_PER_WAVELENGTH as usize).min(values.len());
    let last_max = values[values.len() - last..].iter().copied().fold(0.0, f64::max);
    (unit_sphere_area(potential.dimension()) * acc.sum(), last_max)
}

/// Result of a truncated real-space sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub energy_density: f64,
    pub tail_bound: f64,
    pub cutoff: f64,
    pub pair_count: usize,
}

/// `e(X) = (1/2V) sum_{x in X cap Lambda} sum_{x' != x, |x - x'| < r_cut} phi(x - x')`,
/// with a tail bound `TAIL_SAFETY_FACTOR * rho^2 / 2 * tail_integral`.
/// Fails with `ToleranceUnreachable` when a relative `tolerance` is given and
/// the bound exceeds it.
pub fn realspace_energy_oracle(
    potential: &PairPotential,
    config: &PeriodicConfiguration,
    r_cut: f64,
    tolerance: Option<f64>,
) -> Result<OracleResult> {
    if potential.dimension() != config.dimension() {
        return Err(Error::InvalidParameter("potential and configuration dimensions differ".into()));
    }
    if !(r_cut > 0.0) {
        return Err(Error::InvalidParameter(format!("cutoff radius must be positive, got {r_cut}")));
    }
    let d = config.dimension();
    let basis = config.basis();
    let offsets: Vec<Vector3<f64>> = config
        .fractional_offsets()
        .iter()
        .map(|f| basis.to_cartesian(f))
        .collect();
    let spread = offsets
        .iter()
        .flat_map(|a| offsets.iter().map(move |b| (a - b).norm()))
        .fold(0.0, f64::max);
    let lattice = enumerate_ball(d, basis.rows(), r_cut + spread);

    let mut separations = Vec::new();
    for (j, yj) in offsets.iter().enumerate() {
        for (i, yi) in offsets.iter().enumerate() {
            for p in &lattice {
                if i == j && p.coeffs == [0, 0, 0] {
                    continue;
                }
                let r = (p.vector + yi - yj).norm();
                if r < r_cut {
                    separations.push(r);
                }
            }
        }
    }
    let values: Vec<f64> = separations.par_iter().map(|&r| potential.eval_phi(r)).collect();
    let sum: f64 = values.iter().copied().collect::<NeumaierSum>().sum();
    let rho = config.density();
    let energy_density = sum * basis.density() / 2.0;
    let tail_bound = TAIL_SAFETY_FACTOR * 0.5 * rho * rho * tail_integral(potential, r_cut);
    if let Some(tol) = tolerance {
        if tail_bound > tol * energy_density.abs() {
            return Err(Error::ToleranceUnreachable(format!(
                "tail bound {tail_bound:e} exceeds {tol:e} relative at cutoff {r_cut}"
            )));
        }
    }
    Ok(OracleResult {
        energy_density,
        tail_bound,
        cutoff: r_cut,
        pair_count: separations.len(),
    })
}

/// A truncated real-space sum with its tail bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealSpaceSum {
    pub value: f64,
    pub tail_bound: f64,
}

/// `phi_Lambda(r) = sum_n phi(r + sum n_a L_a a_a)` over images within `r_cut`.
pub fn periodized_phi_realspace(
    potential: &PairPotential,
    cell: &PeriodCell,
    r: &Vector3<f64>,
    r_cut: f64,
) -> RealSpaceSum {
    let d = cell.dimension();
    let edges = cell.edges();
    let x = cell.from_cell_fractional(&cell.to_cell_fractional(r));
    let images = enumerate_ball(d, edges.rows(), r_cut + x.norm());
    let values: Vec<f64> = images
        .par_iter()
        .filter_map(|p| {
            let s = (x + p.vector).norm();
            (s < r_cut).then(|| potential.eval_phi(s))
        })
        .collect();
    RealSpaceSum {
        value: values.iter().copied().collect::<NeumaierSum>().sum(),
        tail_bound: TAIL_SAFETY_FACTOR * tail_integral(potential, r_cut) / cell.volume(),
    }
}
