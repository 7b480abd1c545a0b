//! Volume-preserving deformations of a periodic configuration.

use nalgebra::Matrix3;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{is_admissible, trial_rng, ADMISSIBILITY_TOLERANCE};
use crate::energy::energy_density;
use crate::error::{Error, Result};
use crate::lattice::PeriodicConfiguration;
use crate::spectral::PairPotential;

/// Steps of each walk from the identity.
const WALK_STEPS: usize = 4;

/// Relative tolerance of the plateau check on admissible samples.
pub const PLATEAU_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformationSample {
    pub index: usize,
    /// Leading `d x d` block of `M`, by rows.
    pub matrix: Vec<Vec<f64>>,
    pub determinant: f64,
    pub shortest_reciprocal: f64,
    pub admissible: bool,
    pub energy_density: f64,
    pub plateau: f64,
    pub excess: f64,
    /// Some nonzero reciprocal vector inside the ball carries positive weight.
    pub excess_expected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformationReport {
    pub step: f64,
    pub seed: u64,
    pub admissible_count: usize,
    pub inadmissible_count: usize,
    /// Largest `|e - plateau| / |plateau|` over admissible samples.
    pub max_plateau_deviation: f64,
    pub min_inadmissible_excess: Option<f64>,
    pub plateau_holds: bool,
    pub excess_holds: bool,
    pub samples: Vec<DeformationSample>,
}

/// `exp(A_1) ... exp(A_n)` for traceless `A_i` with Normal(0, step^2)
/// entries, rescaled to unit determinant.
pub fn random_unimodular<R: Rng>(d: usize, step: f64, steps: usize, rng: &mut R) -> Matrix3<f64> {
    let normal = Normal::new(0.0, step.abs()).expect("finite step");
    let mut m = Matrix3::identity();
    for _ in 0..steps {
        let mut a = Matrix3::zeros();
        for i in 0..d {
            for j in 0..d {
                a[(i, j)] = normal.sample(rng);
            }
        }
        let trace = a.trace() / d as f64;
        for i in 0..d {
            a[(i, i)] -= trace;
        }
        m = a.exp() * m;
    }
    project_unimodular(d, &m)
}

fn project_unimodular(d: usize, m: &Matrix3<f64>) -> Matrix3<f64> {
    let mut out = Matrix3::identity();
    let det = block_determinant(d, m);
    let s = det.abs().powf(-1.0 / d as f64);
    for i in 0..d {
        for j in 0..d {
            out[(i, j)] = m[(i, j)] * s;
        }
    }
    out
}

fn block_determinant(d: usize, m: &Matrix3<f64>) -> f64 {
    match d {
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        _ => m.determinant(),
    }
}

/// Energy of `M X` compared with the plateau value at the same density.
pub fn deformation_sample(
    potential: &PairPotential,
    config: &PeriodicConfiguration,
    m: &Matrix3<f64>,
    index: usize,
) -> Result<DeformationSample> {
    let d = config.dimension();
    let deformed = config.transformed(m)?;
    let report = energy_density(potential, &deformed)?;
    let k0 = potential.cutoff();
    let inside = k0 * (1.0 - ADMISSIBILITY_TOLERANCE);
    let excess_expected = report
        .terms
        .iter()
        .any(|t| t.norm < inside && t.phi_hat * t.weight > 0.0);
    Ok(DeformationSample {
        index,
        matrix: (0..d).map(|i| (0..d).map(|j| m[(i, j)]).collect()).collect(),
        determinant: block_determinant(d, m),
        shortest_reciprocal: report.shortest_reciprocal,
        admissible: is_admissible(report.shortest_reciprocal, k0),
        energy_density: report.energy_density,
        plateau: report.plateau,
        excess: report.energy_density - report.plateau,
        excess_expected,
    })
}

/// Sample 0 is the identity; sample `i` is the end point of an independent
/// walk of `WALK_STEPS` steps drawn from substream `i`.
pub fn deformation_scan(
    potential: &PairPotential,
    config: &PeriodicConfiguration,
    samples: usize,
    step: f64,
    seed: u64,
) -> Result<DeformationReport> {
    if !(step.is_finite() && step >= 0.0) {
        return Err(Error::InvalidParameter(format!("step must be nonnegative, got {step}")));
    }
    let d = config.dimension();
    let results: Result<Vec<DeformationSample>> = (0..samples)
        .into_par_iter()
        .map(|index| {
            let m = if index == 0 || step == 0.0 {
                Matrix3::identity()
            } else {
                random_unimodular(d, step, WALK_STEPS, &mut trial_rng(seed, index as u64))
            };
            deformation_sample(potential, config, &m, index)
        })
        .collect();
    let samples = results?;

    let scale = |s: &DeformationSample| {
        if s.plateau != 0.0 {
            s.plateau.abs()
        } else {
            f64::MIN_POSITIVE
        }
    };
    let admissible: Vec<&DeformationSample> = samples.iter().filter(|s| s.admissible).collect();
    let max_plateau_deviation = admissible
        .iter()
        .map(|s| s.excess.abs() / scale(s))
        .fold(0.0, f64::max);
    let min_inadmissible_excess = samples
        .iter()
        .filter(|s| !s.admissible)
        .map(|s| s.excess)
        .min_by(f64::total_cmp);
    let excess_holds = samples
        .iter()
        .filter(|s| !s.admissible && s.excess_expected)
        .all(|s| s.excess > 0.0);
    Ok(DeformationReport {
        step,
        seed,
        admissible_count: admissible.len(),
        inadmissible_count: samples.len() - admissible.len(),
        max_plateau_deviation,
        min_inadmissible_excess,
        plateau_holds: max_plateau_deviation <= PLATEAU_TOLERANCE,
        excess_holds,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::fixtures;
    use crate::lattice::LatticeName;

    const K0: f64 = 2.0 * PI;

    fn bcc(rho: f64) -> PeriodicConfiguration {
        LatticeName::Bcc.configuration(1.0).unwrap().scale_to_density(rho).unwrap()
    }

    #[test]
    fn identity_is_on_the_plateau() {
        let pot = fixtures::longrange_potential(K0).unwrap();
        let rho3 = LatticeName::Bcc.closed_form_threshold(K0).unwrap();
        let s = deformation_sample(&pot, &bcc(rho3), &Matrix3::identity(), 0).unwrap();
        assert!(s.admissible);
        assert!(s.excess.abs() <= 1e-12 * s.plateau.abs());
    }

    #[test]
    fn random_matrices_are_unimodular() {
        let mut rng = trial_rng(5, 0);
        for d in 1..=3 {
            for _ in 0..20 {
                let m = random_unimodular(d, 0.3, 6, &mut rng);
                assert!((block_determinant(d, &m) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn small_shears_of_compressed_bcc_stay_on_the_plateau() {
        let pot = fixtures::longrange_potential(K0).unwrap();
        let rho3 = LatticeName::Bcc.closed_form_threshold(K0).unwrap();
        let r = deformation_scan(&pot, &bcc(1.05 * rho3), 300, 0.004, 2).unwrap();
        assert!(r.admissible_count > 1);
        assert!(r.plateau_holds, "{}", r.max_plateau_deviation);
        assert!(r.excess_holds);
    }

    #[test]
    fn stretching_a_reciprocal_vector_inside_the_ball_raises_the_energy() {
        let pot = fixtures::longrange_potential(K0).unwrap();
        let sc = LatticeName::Sc.configuration(2.0 * PI / K0).unwrap();
        // q = K0 for unit-spaced sc; shrink b_1 to 0.9 K0 at fixed volume
        let s = 0.9f64;
        let m = Matrix3::new(1.0 / s, 0.0, 0.0, 0.0, s.sqrt(), 0.0, 0.0, 0.0, s.sqrt());
        let sample = deformation_sample(&pot, &sc, &m, 0).unwrap();
        assert!(!sample.admissible);
        assert!((sample.shortest_reciprocal - 0.9 * K0).abs() < 1e-12);
        let rho = sc.density();
        // the two vectors +-0.9 K0 e_1 are the only ones inside the ball
        let oracle = 0.5 * rho * rho * 2.0 * pot.phi_hat(0.9 * K0);
        assert!((sample.excess - oracle).abs() < 1e-10 * oracle, "{} vs {oracle}", sample.excess);
    }
}
