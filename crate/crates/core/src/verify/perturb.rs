//! Random perturbations of `X cap Lambda` scored by the periodized energy.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{is_admissible, nearest_neighbour_distance, trial_rng, TrialKind, TrialRecord, GAP_FLOOR};
use crate::energy::{phase, DualGrid};
use crate::error::{Error, Result};
use crate::lattice::{PeriodCell, PeriodicConfiguration};
use crate::spectral::PairPotential;

/// Fixed particle number, or exchange with a reservoir at chemical potential `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Ensemble {
    Canonical,
    Grand { mu: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSettings {
    pub multipliers: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Refuse to run when the configuration violates the stability hypotheses.
    pub enforce_hypotheses: bool,
}

impl PerturbationSettings {
    pub fn new(multipliers: Vec<usize>, trials: usize, seed: u64) -> PerturbationSettings {
        PerturbationSettings {
            multipliers,
            trials,
            seed,
            enforce_hypotheses: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub ensemble: Ensemble,
    pub multipliers: Vec<usize>,
    pub seed: u64,
    pub particles: usize,
    pub density: f64,
    pub cell_volume: f64,
    pub dual_vectors: usize,
    pub shortest_reciprocal: f64,
    pub admissible: bool,
    pub mu_lambda: Option<f64>,
    /// `phi_hat(0) rho - mu - phi(0)/2`; zero when `rho` and `mu` are paired.
    pub chemical_mismatch: f64,
    pub displacement_scale: f64,
    pub trials: usize,
    pub worst_delta: f64,
    pub worst_index: usize,
    /// `-GAP_FLOOR N |phi(0)|`.
    pub tolerance: f64,
    pub passed: bool,
    pub max_prediction_error: f64,
    pub kind_counts: BTreeMap<String, usize>,
    pub records: Vec<TrialRecord>,
}

struct Trial {
    kind: TrialKind,
    removed: Vec<usize>,
    added: Vec<Vector3<f64>>,
}

struct Context<'a> {
    cell: &'a PeriodCell,
    grid: DualGrid,
    reference: Vec<Vector3<f64>>,
    reference_sf: Vec<Complex64>,
    reference_fluctuation: f64,
    sigma: f64,
    cluster_radius: f64,
    grand: bool,
    d: usize,
}

impl Context<'_> {
    fn displace(&self, f: &Vector3<f64>, delta: &Vector3<f64>) -> Vector3<f64> {
        let r = self.cell.from_cell_fractional(f) + delta;
        self.cell.to_cell_fractional(&r)
    }

    fn gaussian(&self, rng: &mut ChaCha8Rng, sigma: f64) -> Vector3<f64> {
        let normal = Normal::new(0.0, sigma).expect("positive scale");
        let mut v = Vector3::zeros();
        for c in 0..self.d {
            v[c] = normal.sample(rng);
        }
        v
    }

    fn uniform(&self, rng: &mut ChaCha8Rng) -> Vector3<f64> {
        let mut f = Vector3::zeros();
        for c in 0..self.d {
            f[c] = rng.random::<f64>();
        }
        f
    }

    /// Minimum-image distance between two cell-fractional points.
    fn separation(&self, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
        let mut t = a - b;
        for c in 0..self.d {
            t[c] -= t[c].round();
        }
        self.cell.from_cell_fractional(&t).norm()
    }

    fn generate(&self, index: usize, rng: &mut ChaCha8Rng) -> Trial {
        let n = self.reference.len();
        if index == 0 || n == 0 {
            return Trial {
                kind: TrialKind::Identity,
                removed: vec![],
                added: vec![],
            };
        }
        let u: f64 = rng.random();
        if u < 0.4 {
            let i = rng.random_range(0..n);
            let delta = self.gaussian(rng, self.sigma);
            Trial {
                kind: TrialKind::Displacement,
                removed: vec![i],
                added: vec![self.displace(&self.reference[i], &delta)],
            }
        } else if u < 0.6 {
            let centre = self.reference[rng.random_range(0..n)];
            let members: Vec<usize> = (0..n)
                .filter(|&j| self.separation(&self.reference[j], &centre) <= self.cluster_radius)
                .collect();
            let shift = self.gaussian(rng, self.sigma);
            let added = members
                .iter()
                .map(|&j| {
                    let jitter = self.gaussian(rng, 0.25 * self.sigma);
                    self.displace(&self.reference[j], &(shift + jitter))
                })
                .collect();
            Trial {
                kind: TrialKind::Cluster,
                removed: members,
                added,
            }
        } else if u < 0.8 {
            let i = rng.random_range(0..n);
            Trial {
                kind: TrialKind::Teleport,
                removed: vec![i],
                added: vec![self.uniform(rng)],
            }
        } else if self.grand {
            if rng.random::<bool>() {
                Trial {
                    kind: TrialKind::Insertion,
                    removed: vec![],
                    added: vec![self.uniform(rng)],
                }
            } else {
                Trial {
                    kind: TrialKind::Deletion,
                    removed: vec![rng.random_range(0..n)],
                    added: vec![],
                }
            }
        } else {
            let added = (0..n)
                .map(|j| {
                    let delta = self.gaussian(rng, 0.1 * self.sigma);
                    self.displace(&self.reference[j], &delta)
                })
                .collect();
            Trial {
                kind: TrialKind::Jitter,
                removed: (0..n).collect(),
                added,
            }
        }
    }

    /// Fluctuation term `(1/2V) sum phi_hat |S_R|^2` of the trial configuration.
    fn trial_fluctuation(&self, trial: &Trial) -> f64 {
        let mut s = self.reference_sf.clone();
        for (k, n) in self.grid.coeffs().iter().enumerate() {
            for &i in &trial.removed {
                let (sin, cos) = phase(n, &self.reference[i]).sin_cos();
                s[k] -= Complex64::new(cos, sin);
            }
            for a in &trial.added {
                let (sin, cos) = phase(n, a).sin_cos();
                s[k] += Complex64::new(cos, sin);
            }
        }
        self.grid.fluctuation_from(&s)
    }
}

/// Random perturbations `R` of `X cap Lambda` with
/// `Delta = [U_Lambda(R) - mu_Lambda N_R] - [U_Lambda(X) - mu_Lambda N_X]`.
/// Trials are 40% single displacements, 20% cluster moves, 20% teleports and
/// 20% insertions/deletions (grand) or small displacements of every particle
/// (canonical). Trial 0 is the identity.
pub fn perturbation_test(
    potential: &PairPotential,
    config: &PeriodicConfiguration,
    ensemble: Ensemble,
    settings: &PerturbationSettings,
) -> Result<PerturbationReport> {
    let d = config.dimension();
    let k0 = potential.cutoff();
    let q = config.reciprocal()?.shortest_norm();
    let admissible = is_admissible(q, k0);
    let phi0 = potential.phi_at_zero();
    let phi_hat0 = potential.phi_hat_at_zero();
    let rho = config.density();
    let (mu, grand) = match ensemble {
        Ensemble::Canonical => (None, false),
        Ensemble::Grand { mu } => (Some(mu), true),
    };
    let chemical_mismatch = mu.map_or(0.0, |mu| phi_hat0 * rho - mu - 0.5 * phi0);
    if settings.enforce_hypotheses {
        if !admissible {
            return Err(Error::HypothesisViolation(format!(
                "shortest reciprocal vector {q} is below the cutoff {k0}"
            )));
        }
        if grand && chemical_mismatch.abs() > 1e-9 * (phi_hat0 * rho).abs().max(phi0.abs()) {
            return Err(Error::HypothesisViolation(format!(
                "density {rho} is not paired with mu (mismatch {chemical_mismatch:e})"
            )));
        }
    }

    let cell = PeriodCell::new(config.basis().clone(), &settings.multipliers)?;
    let grid = DualGrid::new(potential, &cell)?;
    let reference = grid.to_fractional(&cell.points_of(config));
    let reference_sf = grid.structure_factors(&reference);
    let reference_fluctuation = grid.fluctuation_from(&reference_sf);
    let n_x = reference.len();
    let volume = grid.volume();
    let nn = nearest_neighbour_distance(config);
    let ctx = Context {
        cell: &cell,
        reference_fluctuation,
        sigma: 0.5 * nn,
        cluster_radius: 1.5 * nn,
        grand,
        d,
        grid,
        reference,
        reference_sf,
    };
    let mu_lambda = mu.map(|mu| mu + 0.5 * (phi0 - ctx.grid.phi_hat_sum() / volume));
    let floor_x = ctx.grid.floor(n_x);

    let records: Vec<TrialRecord> = (0..settings.trials)
        .into_par_iter()
        .map(|index| {
            let mut rng = trial_rng(settings.seed, index as u64);
            let trial = ctx.generate(index, &mut rng);
            let n_r = n_x + trial.added.len() - trial.removed.len();
            let delta_n = n_r as i64 - n_x as i64;
            let fluctuation_change = ctx.trial_fluctuation(&trial) - ctx.reference_fluctuation;
            let mut delta = fluctuation_change + (ctx.grid.floor(n_r) - floor_x);
            let mut predicted = fluctuation_change;
            if let (Some(mu), Some(mu_l)) = (mu, mu_lambda) {
                let dn = delta_n as f64;
                delta -= mu_l * dn;
                predicted += dn * (phi_hat0 * n_x as f64 / volume - mu - 0.5 * phi0)
                    + phi_hat0 * dn * dn / (2.0 * volume);
            }
            TrialRecord {
                index,
                seed: settings.seed,
                kind: trial.kind,
                delta_n,
                delta,
                predicted: Some(predicted),
            }
        })
        .collect();

    let (worst_index, worst_delta) = records
        .iter()
        .map(|r| (r.index, r.delta))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .unwrap_or((0, 0.0));
    let max_prediction_error = records
        .iter()
        .filter_map(|r| r.predicted.map(|p| (r.delta - p).abs()))
        .fold(0.0, f64::max);
    let mut kind_counts = BTreeMap::new();
    for r in &records {
        let key = serde_json::to_value(r.kind)?.as_str().unwrap_or_default().to_string();
        *kind_counts.entry(key).or_insert(0) += 1;
    }
    let scale = if phi0 != 0.0 { phi0.abs() } else { phi_hat0.abs() * n_x as f64 / volume };
    let tolerance = -GAP_FLOOR * n_x as f64 * scale;
    Ok(PerturbationReport {
        ensemble,
        multipliers: settings.multipliers.clone(),
        seed: settings.seed,
        particles: n_x,
        density: rho,
        cell_volume: volume,
        dual_vectors: ctx.grid.len(),
        shortest_reciprocal: q,
        admissible,
        mu_lambda,
        chemical_mismatch,
        displacement_scale: ctx.sigma,
        trials: settings.trials,
        worst_delta,
        worst_index,
        tolerance,
        passed: worst_delta >= tolerance,
        max_prediction_error,
        kind_counts,
        records,
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
    fn identity_trial_has_zero_gap() {
        let pot = fixtures::mollified_test_potential(3, K0).unwrap();
        let rho3 = LatticeName::Bcc.closed_form_threshold(K0).unwrap();
        let r = perturbation_test(&pot, &bcc(rho3), Ensemble::Canonical, &PerturbationSettings::new(vec![2, 2, 2], 1, 1))
            .unwrap();
        assert_eq!(r.records[0].kind, TrialKind::Identity);
        assert_eq!(r.records[0].delta, 0.0);
    }

    #[test]
    fn canonical_bcc_is_stable() {
        let pot = fixtures::mollified_test_potential(3, K0).unwrap();
        let rho3 = LatticeName::Bcc.closed_form_threshold(K0).unwrap();
        let r = perturbation_test(&pot, &bcc(rho3), Ensemble::Canonical, &PerturbationSettings::new(vec![3, 3, 3], 500, 3))
            .unwrap();
        assert!(r.passed, "worst {} tolerance {}", r.worst_delta, r.tolerance);
        assert!(r.records.iter().skip(1).any(|t| t.delta > 0.0));
    }

    #[test]
    fn grand_mismatch_follows_the_closed_form() {
        let pot = fixtures::longrange_potential(K0).unwrap();
        let rho = 1.1 * LatticeName::Bcc.closed_form_threshold(K0).unwrap();
        let paired = pot.phi_hat_at_zero() * rho - 0.5 * pot.phi_at_zero();
        let mut settings = PerturbationSettings::new(vec![2, 2, 2], 400, 11);
        assert!(matches!(
            perturbation_test(&pot, &bcc(rho), Ensemble::Grand { mu: paired + 50.0 }, &settings),
            Err(Error::HypothesisViolation(_))
        ));
        settings.enforce_hypotheses = false;
        let mu = paired + 1e5;
        let r = perturbation_test(&pot, &bcc(rho), Ensemble::Grand { mu }, &settings).unwrap();
        let mismatch = pot.phi_hat_at_zero() * rho - mu - 0.5 * pot.phi_at_zero();
        assert!((r.chemical_mismatch - mismatch).abs() < 1e-9 * mismatch.abs());
        let exchanges: Vec<_> = r.records.iter().filter(|t| t.delta_n != 0).collect();
        assert!(exchanges.iter().any(|t| t.kind == TrialKind::Insertion));
        assert!(exchanges.iter().any(|t| t.kind == TrialKind::Deletion));
        for t in exchanges {
            assert_eq!(t.delta.signum(), (t.delta_n as f64 * mismatch).signum(), "{t:?}");
            // remaining terms are nonnegative
            assert!(t.delta >= t.delta_n as f64 * mismatch - 1e-9 * mismatch.abs());
        }
        assert!(r.max_prediction_error < 1e-9 * mismatch.abs(), "{}", r.max_prediction_error);
        assert!(r.records.iter().any(|t| t.kind == TrialKind::Insertion));
    }
}
