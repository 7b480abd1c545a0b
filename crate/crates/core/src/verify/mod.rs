//! Randomized and deterministic checks of ground-state properties:
//! perturbation stability, degeneracy under deformations, uniqueness at the
//! threshold density, and windowed comparisons between configurations.

mod deform;
mod perturb;
mod unique;
mod window;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::ExternalField;
use crate::lattice::{enumerate_ball, PeriodicConfiguration};
use crate::numerics::NeumaierSum;

pub use deform::{
    deformation_sample, deformation_scan, random_unimodular, DeformationReport, DeformationSample, PLATEAU_TOLERANCE,
};
pub use perturb::{perturbation_test, Ensemble, PerturbationReport, PerturbationSettings};
pub use unique::{uniqueness_at_threshold, CompetitorResult, CompetitorSet, UniquenessReport, UNIQUENESS_MARGIN};
pub use window::{
    global_minimality_check, union_window_check, window_points, GlobalMinimality, UnionReport, UnionSettings,
    WindowGap,
};

/// Relative slack in `q >= K0` that absorbs rounding in reciprocal norms.
pub const ADMISSIBILITY_TOLERANCE: f64 = 1e-12;

/// Relative floor on trial gaps, in units of `N |phi(0)|`.
pub const GAP_FLOOR: f64 = 1e-9;

/// Generator for trial `index` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn is_admissible(q: f64, k0: f64) -> bool {
    q >= k0 * (1.0 - ADMISSIBILITY_TOLERANCE)
}

/// Smallest distance between two distinct points of a periodic configuration.
pub fn nearest_neighbour_distance(config: &PeriodicConfiguration) -> f64 {
    let d = config.dimension();
    let basis = config.basis();
    let (shortest, _) = basis.shortest_vector();
    let offsets: Vec<Vector3<f64>> = config
        .fractional_offsets()
        .iter()
        .map(|f| basis.to_cartesian(f))
        .collect();
    let spread = offsets
        .iter()
        .flat_map(|a| offsets.iter().map(move |b| (a - b).norm()))
        .fold(0.0, f64::max);
    let mut best = shortest;
    if offsets.len() > 1 {
        for p in enumerate_ball(d, basis.rows(), shortest + spread + 1e-9 * shortest) {
            for (i, yi) in offsets.iter().enumerate() {
                for (j, yj) in offsets.iter().enumerate() {
                    if i != j {
                        best = best.min((p.vector + yi - yj).norm());
                    }
                }
            }
        }
    }
    best
}

/// Kind of a random perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialKind {
    Identity,
    Displacement,
    Cluster,
    Teleport,
    Insertion,
    Deletion,
    Jitter,
}

/// One line of a trial log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub seed: u64,
    pub kind: TrialKind,
    pub delta_n: i64,
    pub delta: f64,
    /// Closed-form value of the same gap, when one is available.
    pub predicted: Option<f64>,
}

/// Serialize trial records as JSON lines.
pub fn write_json_lines<W: std::io::Write>(records: &[TrialRecord], mut out: W) -> crate::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// External field of a union of periodic configurations.
#[derive(Debug, Clone)]
pub(crate) struct UnionField {
    parts: Vec<(ExternalField, Vector3<f64>)>,
}

impl UnionField {
    /// Components `X_i + shift_i`.
    pub(crate) fn new(parts: Vec<(ExternalField, Vector3<f64>)>) -> UnionField {
        UnionField { parts }
    }

    pub(crate) fn eval(&self, r: &Vector3<f64>) -> f64 {
        self.parts
            .iter()
            .map(|(f, s)| f.eval(&(r - s)).value)
            .collect::<NeumaierSum>()
            .sum()
    }

    pub(crate) fn expected(&self) -> f64 {
        self.parts.iter().map(|(f, _)| f.expected()).sum()
    }
}

fn pair_sum<F: Fn(f64) -> f64 + Sync>(a: &[Vector3<f64>], b: &[Vector3<f64>], skip_diagonal: bool, phi: &F) -> f64 {
    let rows: Vec<f64> = a
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let mut acc = NeumaierSum::new();
            for (j, y) in b.iter().enumerate() {
                if skip_diagonal && i == j {
                    continue;
                }
                acc.add(phi((x - y).norm()));
            }
            acc.sum()
        })
        .collect();
    rows.into_iter().collect::<NeumaierSum>().sum()
}

/// Energy change of replacing the points `removed` of `Z cap Lambda` by
/// `added`, with the rest of `Z` held fixed:
/// `sum_A U(a|Z) - sum_B U(b|Z) + |B| phi(0) + U(A) + U(B) - sum_{A x B} phi`.
pub(crate) fn exchange_energy<F: Fn(f64) -> f64 + Sync>(
    field: &UnionField,
    phi_at_zero: f64,
    added: &[Vector3<f64>],
    removed: &[Vector3<f64>],
    phi: &F,
) -> f64 {
    let field_added: NeumaierSum = added.par_iter().map(|a| field.eval(a)).collect::<Vec<_>>().into_iter().collect();
    let field_removed: NeumaierSum =
        removed.par_iter().map(|b| field.eval(b)).collect::<Vec<_>>().into_iter().collect();
    let mut acc = NeumaierSum::new();
    acc.add(field_added.sum());
    acc.add(-field_removed.sum());
    acc.add(removed.len() as f64 * phi_at_zero);
    acc.add(0.5 * pair_sum(added, added, true, phi));
    acc.add(0.5 * pair_sum(removed, removed, true, phi));
    acc.add(-pair_sum(added, removed, false, phi));
    acc.sum()
}
