//! Competitors at the threshold density against the minimal lattice.

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::trial_rng;
use crate::energy::energy_density;
use crate::error::{Error, Result};
use crate::lattice::{LatticeBasis, LatticeName, PeriodicConfiguration};
use crate::spectral::PairPotential;

/// Samples of `phi_hat` on `(0, K0)` used to check strict positivity.
const POSITIVITY_SAMPLES: usize = 4096;

/// Relative margin every competitor must clear.
pub const UNIQUENESS_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetitorSet {
    /// Include the named lattices of the dimension other than the minimal one.
    pub named: bool,
    pub random_bravais: usize,
    pub random_pairs: usize,
    pub seed: u64,
}

impl Default for CompetitorSet {
    fn default() -> Self {
        CompetitorSet {
            named: true,
            random_bravais: 20,
            random_pairs: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetitorResult {
    pub label: String,
    pub points_per_cell: usize,
    pub density: f64,
    pub shortest_reciprocal: f64,
    pub energy_density: f64,
    /// `e(competitor) - e(reference)`.
    pub gap: f64,
    pub shell_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub dimension: usize,
    pub cutoff: f64,
    pub threshold_density: f64,
    pub reference: String,
    pub reference_energy: f64,
    pub plateau: f64,
    pub profile_positive: bool,
    pub min_gap: f64,
    pub min_gap_label: String,
    /// `UNIQUENESS_MARGIN |e(reference)|`.
    pub margin: f64,
    pub all_exceed: bool,
    pub all_exceed_margin: bool,
    pub competitors: Vec<CompetitorResult>,
}

fn random_basis(d: usize, rng: &mut ChaCha8Rng) -> Result<LatticeBasis> {
    loop {
        let rows: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..d).map(|_| StandardNormal.sample(rng)).collect())
            .collect();
        let basis = match LatticeBasis::new(&rows) {
            Ok(b) => b,
            Err(Error::DegenerateBasis(_)) => continue,
            Err(e) => return Err(e),
        };
        let norms: f64 = (0..d).map(|i| basis.generator(i).norm()).product();
        if basis.cell_volume() > 0.2 * norms {
            return Ok(basis);
        }
    }
}

fn random_pair(d: usize, rng: &mut ChaCha8Rng) -> Result<PeriodicConfiguration> {
    loop {
        let basis = random_basis(d, rng)?;
        let mut y = Vector3::zeros();
        for c in 0..d {
            y[c] = rng.random_range(0.05..0.95);
        }
        let config = PeriodicConfiguration::from_fractional(basis, &[Vector3::zeros(), y])?;
        if config.is_minimal() {
            return Ok(config);
        }
    }
}

/// Energy densities at the threshold density of every competitor, compared
/// with the minimal lattice (chain, triangular or bcc).
pub fn uniqueness_at_threshold(potential: &PairPotential, competitors: &CompetitorSet) -> Result<UniquenessReport> {
    let d = potential.dimension();
    let k0 = potential.cutoff();
    let reference_name = match d {
        1 => LatticeName::Chain,
        2 => LatticeName::Triangular,
        _ => LatticeName::Bcc,
    };
    let rho = reference_name.closed_form_threshold(k0).expect("closed form");
    let reference = reference_name.configuration(1.0)?.scale_to_density(rho)?;
    let reference_report = energy_density(potential, &reference)?;
    let e_ref = reference_report.energy_density;

    let profile_positive = (0..POSITIVITY_SAMPLES)
        .all(|i| potential.phi_hat(k0 * (i as f64 + 0.5) / POSITIVITY_SAMPLES as f64) > 0.0);

    let mut configs: Vec<(String, PeriodicConfiguration)> = Vec::new();
    if competitors.named {
        for name in LatticeName::all_default() {
            if name.dimension() == d && name != reference_name {
                configs.push((name.label().to_string(), name.configuration(1.0)?));
            }
        }
    }
    for i in 0..competitors.random_bravais {
        let mut rng = trial_rng(competitors.seed, i as u64);
        configs.push((format!("random-bravais-{i}"), PeriodicConfiguration::bravais(random_basis(d, &mut rng)?)));
    }
    for i in 0..competitors.random_pairs {
        let mut rng = trial_rng(competitors.seed, (competitors.random_bravais + i) as u64);
        configs.push((format!("random-pair-{i}"), random_pair(d, &mut rng)?));
    }

    let mut results = Vec::with_capacity(configs.len());
    for (label, config) in configs {
        let scaled = config.scale_to_density(rho)?;
        let r = energy_density(potential, &scaled)?;
        results.push(CompetitorResult {
            label,
            points_per_cell: scaled.points_per_cell(),
            density: scaled.density(),
            shortest_reciprocal: r.shortest_reciprocal,
            energy_density: r.energy_density,
            gap: r.energy_density - e_ref,
            shell_sum: r.shell_sum,
        });
    }
    let (min_gap, min_gap_label) = results
        .iter()
        .map(|c| (c.gap, c.label.clone()))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap_or((f64::INFINITY, String::new()));
    let margin = UNIQUENESS_MARGIN * e_ref.abs();
    Ok(UniquenessReport {
        dimension: d,
        cutoff: k0,
        threshold_density: rho,
        reference: reference_name.label().to_string(),
        reference_energy: e_ref,
        plateau: reference_report.plateau,
        profile_positive,
        min_gap,
        min_gap_label,
        margin,
        all_exceed: results.iter().all(|c| c.gap > 0.0),
        all_exceed_margin: results.iter().all(|c| c.gap > margin),
        competitors: results,
    })
}
