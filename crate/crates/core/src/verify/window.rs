//! Finite windows `Lambda = [-W/2, W/2)^d` embedded in infinite periodic
//! environments. Interactions with the outside are taken from the exact
//! finite-sum field, so no real-space truncation enters.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    exchange_energy, is_admissible, nearest_neighbour_distance, trial_rng, TrialKind, TrialRecord, UnionField,
    GAP_FLOOR,
};
use crate::energy::{energy_density, ExternalField};
use crate::error::{Error, Result};
use crate::lattice::{enumerate_ball, PeriodicConfiguration};
use crate::spectral::{PairPotential, RadialTable};

/// Table resolution for in-window pair sums.
const TABLE_POINTS_PER_WAVELENGTH: usize = 1024;

/// Radii sampled when estimating the table interpolation error.
const TABLE_ERROR_SAMPLES: usize = 256;

fn in_window(d: usize, w: f64, r: &Vector3<f64>) -> bool {
    (0..d).all(|c| r[c] >= -0.5 * w && r[c] < 0.5 * w)
}

/// `(X + shift) cap [-W/2, W/2)^d`, sorted lexicographically.
pub fn window_points(config: &PeriodicConfiguration, shift: &Vector3<f64>, side: f64) -> Vec<Vector3<f64>> {
    let d = config.dimension();
    let basis = config.basis();
    let offsets: Vec<Vector3<f64>> = config
        .fractional_offsets()
        .iter()
        .map(|f| basis.to_cartesian(f))
        .collect();
    let reach = offsets.iter().map(|y| y.norm()).fold(0.0, f64::max);
    let radius = 0.5 * side * (d as f64).sqrt() + reach + shift.norm() + 1e-9 * side;
    let mut out: Vec<Vector3<f64>> = enumerate_ball(d, basis.rows(), radius)
        .iter()
        .flat_map(|p| offsets.iter().map(move |y| p.vector + y + shift))
        .filter(|r| in_window(d, side, r))
        .collect();
    out.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowGap {
    pub side: f64,
    pub volume: f64,
    /// `W^{d-1}`.
    pub surface: f64,
    pub points_x: usize,
    pub points_y: usize,
    /// `U(Y cap Lambda | X \ Lambda) - U(X cap Lambda | X \ Lambda)`.
    pub gap: f64,
    pub gap_per_volume: f64,
    pub error_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalMinimality {
    pub density: f64,
    pub energy_x: f64,
    pub energy_y: f64,
    /// `e(Y) - e(X)`.
    pub expected_slope: f64,
    /// Volume coefficient `a` of the fit `gap = a V + b W^{d-1}`.
    pub fitted_slope: f64,
    pub fitted_surface: f64,
    pub relative_slope_error: f64,
    pub windows: Vec<WindowGap>,
}

fn fit_volume_surface(windows: &[WindowGap]) -> (f64, f64) {
    if windows.len() == 1 {
        return (windows[0].gap_per_volume, 0.0);
    }
    let (mut svv, mut svs, mut sss, mut svg, mut ssg) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for w in windows {
        // scale rows by 1/V so every window carries similar weight
        let (v, s, g) = (1.0, w.surface / w.volume, w.gap_per_volume);
        svv += v * v;
        svs += v * s;
        sss += s * s;
        svg += v * g;
        ssg += s * g;
    }
    let det = svv * sss - svs * svs;
    if det.abs() <= 1e-300 {
        return (svg / svv, 0.0);
    }
    ((sss * svg - svs * ssg) / det, (svv * ssg - svs * svg) / det)
}

fn table_error(potential: &PairPotential, table: &RadialTable) -> f64 {
    let r_max = table.r_max();
    (0..TABLE_ERROR_SAMPLES)
        .into_par_iter()
        .map(|i| {
            // irrational stride keeps samples off the nodes
            let r = r_max * ((i as f64 + 0.5) * 0.618_033_988_749_894_9).fract();
            (table.eval(r) - potential.eval_phi(r)).abs()
        })
        .reduce(|| 0.0, f64::max)
}

/// The `count` points of `Y` nearest the origin in the max-norm, ties broken
/// lexicographically.
fn nearest_points(config: &PeriodicConfiguration, count: usize, side: f64) -> Vec<Vector3<f64>> {
    let d = config.dimension();
    let mut side = side;
    loop {
        let pts = window_points(config, &Vector3::zeros(), side);
        if pts.len() >= count + count / 2 + 8 {
            let mut keyed: Vec<(f64, Vector3<f64>)> = pts
                .into_iter()
                .map(|p| ((0..d).map(|c| p[c].abs()).fold(0.0, f64::max), p))
                .collect();
            keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
            return keyed.into_iter().take(count).map(|(_, p)| p).collect();
        }
        side *= 1.25;
    }
}

/// Replace `X cap Lambda` by `Y cap Lambda` in growing cubic windows and fit
/// the energy gap against `a V + b W^{d-1}`. The outside of the window is the
/// infinite configuration `X`. With `match_counts`, the replacement is the
/// `N_{X cap Lambda}` points of `Y` nearest the window centre, so that the
/// comparison is at fixed particle number.
pub fn global_minimality_check(
    potential: &PairPotential,
    x: &PeriodicConfiguration,
    y: &PeriodicConfiguration,
    sides: &[f64],
    match_counts: bool,
) -> Result<GlobalMinimality> {
    let d = x.dimension();
    if y.dimension() != d || potential.dimension() != d {
        return Err(Error::InvalidParameter("dimensions differ".into()));
    }
    let rho = x.density();
    if (y.density() - rho).abs() > 1e-9 * rho {
        return Err(Error::InvalidParameter(format!(
            "densities differ: {} and {}",
            rho,
            y.density()
        )));
    }
    if sides.is_empty() || sides.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::InvalidParameter("window sides must be positive".into()));
    }
    let energy_x = energy_density(potential, x)?.energy_density;
    let energy_y = energy_density(potential, y)?.energy_density;
    let field = UnionField::new(vec![(ExternalField::new(potential, x)?, Vector3::zeros())]);
    let phi0 = potential.phi_at_zero();
    let largest = sides.iter().copied().fold(0.0, f64::max);
    let table = RadialTable::build(potential, largest * (d as f64).sqrt() * 1.5, TABLE_POINTS_PER_WAVELENGTH);
    let eps = table_error(potential, &table);
    let phi = |r: f64| table.eval(r);

    let mut windows = Vec::with_capacity(sides.len());
    for &side in sides {
        let px = window_points(x, &Vector3::zeros(), side);
        let py = if match_counts {
            nearest_points(y, px.len(), side)
        } else {
            window_points(y, &Vector3::zeros(), side)
        };
        let gap = if px == py { 0.0 } else { exchange_energy(&field, phi0, &py, &px, &phi) };
        let pairs = {
            let (nx, ny) = (px.len() as f64, py.len() as f64);
            0.5 * nx * nx + 0.5 * ny * ny + nx * ny
        };
        let volume = side.powi(d as i32);
        windows.push(WindowGap {
            side,
            volume,
            surface: side.powi(d as i32 - 1),
            points_x: px.len(),
            points_y: py.len(),
            gap,
            gap_per_volume: gap / volume,
            error_bound: eps * pairs,
        });
    }
    let last = windows
        .iter()
        .max_by(|a, b| a.side.total_cmp(&b.side))
        .expect("nonempty");
    if last.gap != 0.0 && last.error_bound >= last.gap.abs() {
        return Err(Error::WindowTooSmall(format!(
            "error bound {:e} exceeds the gap {:e} at side {}",
            last.error_bound, last.gap, last.side
        )));
    }
    let (a, b) = fit_volume_surface(&windows);
    let expected = energy_y - energy_x;
    Ok(GlobalMinimality {
        density: rho,
        energy_x,
        energy_y,
        expected_slope: expected,
        fitted_slope: a,
        fitted_surface: b,
        relative_slope_error: if expected != 0.0 { (a - expected).abs() / expected.abs() } else { a.abs() },
        windows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnionSettings {
    pub side: f64,
    pub field_points: usize,
    pub trials: usize,
    pub seed: u64,
    /// Defaults to `rho phi_hat(0) - phi(0)/2` for the total density.
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnionReport {
    pub components: usize,
    pub densities: Vec<f64>,
    pub all_admissible: bool,
    /// `sum_i rho_i phi_hat(0)`.
    pub expected_field: f64,
    /// Largest `|U(r|Z) - expected| / expected` over the test points.
    pub max_field_deviation: f64,
    pub field_constant: bool,
    pub particles_in_window: usize,
    pub mu: f64,
    pub worst_delta: f64,
    pub tolerance: f64,
    pub stable: bool,
    pub records: Vec<TrialRecord>,
}

/// Field and windowed grand-canonical stability of a union of translated
/// periodic configurations `X_i + shift_i`.
pub fn union_window_check(
    potential: &PairPotential,
    components: &[(PeriodicConfiguration, Vector3<f64>)],
    settings: &UnionSettings,
) -> Result<UnionReport> {
    let configs: Vec<&PeriodicConfiguration> = components.iter().map(|(c, _)| c).collect();
    if configs.is_empty() {
        return Err(Error::InvalidParameter("union needs at least one configuration".into()));
    }
    let d = potential.dimension();
    if configs.iter().any(|c| c.dimension() != d) {
        return Err(Error::InvalidParameter("dimensions differ".into()));
    }
    if !(settings.side.is_finite() && settings.side > 0.0) {
        return Err(Error::InvalidParameter("window side must be positive".into()));
    }
    let k0 = potential.cutoff();
    let mut all_admissible = true;
    for c in &configs {
        all_admissible &= is_admissible(c.reciprocal()?.shortest_norm(), k0);
    }
    let parts: Result<Vec<(ExternalField, Vector3<f64>)>> = components
        .iter()
        .map(|(c, s)| Ok((ExternalField::new(potential, c)?, *s)))
        .collect();
    let field = UnionField::new(parts?);
    let expected = field.expected();
    let side = settings.side;
    let uniform = |rng: &mut rand_chacha::ChaCha8Rng| {
        let mut r = Vector3::zeros();
        for c in 0..d {
            r[c] = (rng.random::<f64>() - 0.5) * side;
        }
        r
    };

    let deviations: Vec<f64> = (0..settings.field_points)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(settings.seed, i as u64);
            let r = uniform(&mut rng);
            (field.eval(&r) - expected).abs() / expected.abs().max(f64::MIN_POSITIVE)
        })
        .collect();
    let max_field_deviation = deviations.into_iter().fold(0.0, f64::max);

    let phi0 = potential.phi_at_zero();
    let phi_hat0 = potential.phi_hat_at_zero();
    let rho_total: f64 = configs.iter().map(|c| c.density()).sum();
    let mu = settings.mu.unwrap_or(rho_total * phi_hat0 - 0.5 * phi0);
    let points: Vec<Vector3<f64>> = components
        .iter()
        .flat_map(|(c, s)| window_points(c, s, side))
        .collect();
    let n = points.len();
    let sigma = 0.5
        * configs
            .iter()
            .map(|c| nearest_neighbour_distance(c))
            .fold(f64::INFINITY, f64::min);
    let normal = Normal::new(0.0, sigma).expect("positive spacing");
    let phi = |r: f64| potential.eval_phi(r);
    let offset = settings.field_points as u64;

    let records: Vec<TrialRecord> = (0..settings.trials)
        .into_par_iter()
        .map(|index| {
            let mut rng = trial_rng(settings.seed, offset + index as u64);
            let gaussian = |rng: &mut rand_chacha::ChaCha8Rng| {
                let mut v = Vector3::zeros();
                for c in 0..d {
                    v[c] = normal.sample(rng);
                }
                v
            };
            let u: f64 = rng.random();
            let (kind, removed, added): (TrialKind, Vec<Vector3<f64>>, Vec<Vector3<f64>>) = if n == 0 {
                (TrialKind::Insertion, vec![], vec![uniform(&mut rng)])
            } else if u < 0.4 {
                let p = points[rng.random_range(0..n)];
                (TrialKind::Displacement, vec![p], vec![p + gaussian(&mut rng)])
            } else if u < 0.6 {
                let centre = points[rng.random_range(0..n)];
                let members: Vec<Vector3<f64>> =
                    points.iter().copied().filter(|p| (p - centre).norm() <= 3.0 * sigma).collect();
                let shift = gaussian(&mut rng);
                let moved = members.iter().map(|p| p + shift + 0.25 * gaussian(&mut rng)).collect();
                (TrialKind::Cluster, members, moved)
            } else if u < 0.8 {
                (TrialKind::Teleport, vec![points[rng.random_range(0..n)]], vec![uniform(&mut rng)])
            } else if rng.random::<bool>() {
                (TrialKind::Insertion, vec![], vec![uniform(&mut rng)])
            } else {
                (TrialKind::Deletion, vec![points[rng.random_range(0..n)]], vec![])
            };
            let delta_n = added.len() as i64 - removed.len() as i64;
            let delta = exchange_energy(&field, phi0, &added, &removed, &phi) - mu * delta_n as f64;
            TrialRecord {
                index,
                seed: settings.seed,
                kind,
                delta_n,
                delta,
                predicted: None,
            }
        })
        .collect();
    let worst_delta = records.iter().map(|r| r.delta).fold(f64::INFINITY, f64::min);
    let worst_delta = if records.is_empty() { 0.0 } else { worst_delta };
    let tolerance = -GAP_FLOOR * n.max(1) as f64 * phi0.abs().max(phi_hat0 * rho_total);
    Ok(UnionReport {
        components: configs.len(),
        densities: configs.iter().map(|c| c.density()).collect(),
        all_admissible,
        expected_field: expected,
        max_field_deviation,
        field_constant: max_field_deviation <= 1e-10,
        particles_in_window: n,
        mu,
        worst_delta,
        tolerance,
        stable: worst_delta >= tolerance,
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
    fn window_points_of_sc() {
        let sc = LatticeName::Sc.configuration(1.0).unwrap();
        let pts = window_points(&sc, &Vector3::zeros(), 3.0);
        // coordinates -1, 0, 1 in each direction
        assert_eq!(pts.len(), 27);
    }

    #[test]
    fn identical_configurations_have_zero_gap() {
        let pot = fixtures::longrange_potential(K0).unwrap();
        let x = bcc(0.8);
        let r = global_minimality_check(&pot, &x, &x, &[3.0, 4.0], false).unwrap();
        for w in &r.windows {
            assert_eq!(w.gap, 0.0);
        }
    }

    #[test]
    fn bcc_in_an_fcc_background_lowers_the_energy() {
        let pot = fixtures::shell_potential(3, K0, 0.85).unwrap();
        let rho3 = LatticeName::Bcc.closed_form_threshold(K0).unwrap();
        let x = LatticeName::Fcc.configuration(1.0).unwrap().scale_to_density(rho3).unwrap();
        let r = global_minimality_check(&pot, &x, &bcc(rho3), &[6.0, 8.0, 10.0], true).unwrap();
        assert!(r.expected_slope < 0.0);
        for w in &r.windows {
            assert_eq!(w.points_x, w.points_y);
            assert!(w.gap < 0.0 && w.error_bound < w.gap.abs(), "{w:?}");
        }
    }

    #[test]
    fn union_of_two_bcc_copies_has_doubled_constant_field() {
        let pot = fixtures::longrange_potential(K0).unwrap();
        let rho3 = LatticeName::Bcc.closed_form_threshold(K0).unwrap();
        let a = bcc(rho3);
        let shift = Vector3::new(0.123, -0.31, 0.77);
        let settings = UnionSettings {
            side: 4.0,
            field_points: 200,
            trials: 300,
            seed: 4,
            mu: None,
        };
        let r = union_window_check(&pot, &[(a.clone(), Vector3::zeros()), (a.clone(), shift)], &settings).unwrap();
        assert!((r.expected_field - 2.0 * rho3 * pot.phi_hat_at_zero()).abs() < 1e-12 * r.expected_field);
        assert!(r.field_constant, "{}", r.max_field_deviation);
        assert!(r.stable, "{} < {}", r.worst_delta, r.tolerance);
    }

    #[test]
    fn single_component_union_reduces_to_the_field() {
        let pot = fixtures::longrange_potential(K0).unwrap();
        let a = bcc(0.9);
        let settings = UnionSettings {
            side: 3.0,
            field_points: 50,
            trials: 0,
            seed: 1,
            mu: None,
        };
        let r = union_window_check(&pot, &[(a.clone(), Vector3::zeros())], &settings).unwrap();
        let f = ExternalField::new(&pot, &a).unwrap();
        assert_eq!(r.expected_field, f.expected());
        assert!(r.field_constant);
    }
}
