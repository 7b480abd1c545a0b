//! Direct minimization of the periodized energy `U_Lambda(R)` over particle
//! positions at fixed `N`.

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{phase, structure_factor, DualGrid};
use crate::error::{Error, Result};
use crate::lattice::{truncate, wrap_unit, Coeffs, LatticeBasis, PeriodCell, PeriodicConfiguration};
use crate::numerics::NeumaierSum;
use crate::spectral::PairPotential;
use crate::verify::trial_rng;

/// Armijo sufficient-decrease constant.
const ARMIJO_C: f64 = 1e-4;
const BACKTRACK_FACTOR: f64 = 0.5;
const MAX_BACKTRACKS: usize = 80;
/// Initial step as a fraction of the mean spacing `(V/N)^{1/d}`.
const STEP_FRACTION: f64 = 0.1;
const COOLING: f64 = 0.95;
const MIN_ACCEPTANCE: f64 = 0.05;
/// Slack in the floor assertion, relative to `|floor| + N phi_hat(0)/V`.
const FLOOR_SLACK: f64 = 1e-12;
/// Descent stops after this many iterations whose decrease is below
/// `STALL_RESOLUTION` times the energy scale.
const STALL_ITERATIONS: usize = 200;
const STALL_RESOLUTION: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Descent,
    AnnealThenDescent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizeSettings {
    pub method: Method,
    pub seed: u64,
    pub max_iterations: usize,
    /// Stop when `max_j |grad_j U| < gradient_tolerance phi_hat(0) N / V`.
    pub gradient_tolerance: f64,
    /// Sweep budget of each annealing stage.
    pub max_sweeps: usize,
    /// Anneal-and-descend cycles before giving up on the floor.
    pub max_cycles: usize,
    /// A run counts as at the floor once `U - floor < floor_tolerance |floor|`.
    pub floor_tolerance: f64,
    /// Starting temperature; defaults to the initial fluctuation energy per particle.
    pub initial_temperature: Option<f64>,
}

impl Default for MinimizeSettings {
    fn default() -> Self {
        MinimizeSettings {
            method: Method::Descent,
            seed: 0,
            max_iterations: 100_000,
            gradient_tolerance: 1e-10,
            max_sweeps: 2000,
            max_cycles: 20,
            floor_tolerance: 1e-8,
            initial_temperature: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizationRun {
    pub seed: u64,
    pub method: Method,
    pub dimension: usize,
    pub particles: usize,
    /// Cell edges `L_alpha a_alpha`.
    pub cell: Vec<Vec<f64>>,
    pub volume: f64,
    pub dual_vectors: usize,
    pub initial_positions: Vec<Vec<f64>>,
    pub final_positions: Vec<Vec<f64>>,
    /// Energies after each sweep of the annealing stage of the reported cycle.
    pub annealing_energies: Vec<f64>,
    pub annealing_sweeps: usize,
    /// Energies of the accepted descent iterates of the reported cycle.
    pub energies: Vec<f64>,
    pub cycles: usize,
    pub final_energy: f64,
    pub floor: f64,
    /// `U_final - floor`, evaluated as the nonnegative fluctuation sum.
    pub floor_gap: f64,
    /// `max_{k != 0 in ball} |S(k)|^2 / N^2`.
    pub residual: f64,
    pub gradient_norm: f64,
    pub gradient_threshold: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Energy and gradient of `U_Lambda` on a fixed dual grid.
struct Landscape<'a> {
    grid: &'a DualGrid,
    edges: LatticeBasis,
    d: usize,
}

impl<'a> Landscape<'a> {
    fn new(grid: &'a DualGrid) -> Landscape<'a> {
        let edges = grid.cell().edges();
        let d = grid.cell().dimension();
        Landscape { grid, edges, d }
    }

    fn structure_factors(&self, x: &[Vector3<f64>]) -> Vec<Complex64> {
        self.grid.structure_factors(x)
    }

    fn check_floor(&self, fluctuation: f64, n: usize) -> Result<()> {
        let floor = self.grid.floor(n);
        let scale = floor.abs() + n as f64 * self.grid.phi_hat_zero().abs() / self.grid.volume();
        if fluctuation + floor < floor - FLOOR_SLACK * scale {
            return Err(Error::ConstraintViolation(format!(
                "U_Lambda = {} fell below the floor {floor}",
                fluctuation + floor
            )));
        }
        Ok(())
    }

    /// Fluctuation part of the energy, checked against the floor.
    fn fluctuation(&self, x: &[Vector3<f64>]) -> Result<(f64, Vec<Complex64>)> {
        let s = self.structure_factors(x);
        let f = self.grid.fluctuation_from(&s);
        self.check_floor(f, x.len())?;
        Ok((f, s))
    }

    /// `grad_j U = V^{-1} sum_k phi_hat(k) (-k) Im[conj(S(k)) e^{i k . r_j}]`.
    fn gradient(&self, x: &[Vector3<f64>], s: &[Complex64]) -> Vec<Vector3<f64>> {
        let grid = self.grid;
        let v = grid.volume();
        let one = |xj: &Vector3<f64>| {
            let mut acc = [NeumaierSum::new(), NeumaierSum::new(), NeumaierSum::new()];
            for (((n, k), w), sk) in grid.coeffs().iter().zip(grid.vectors()).zip(grid.phi_hat_values()).zip(s) {
                let (sin, cos) = phase(n, xj).sin_cos();
                // Im[conj(S) e^{i theta}]
                let im = sk.re * sin - sk.im * cos;
                let c = -w * im;
                for a in 0..3 {
                    acc[a].add(c * k[a]);
                }
            }
            Vector3::new(acc[0].sum(), acc[1].sum(), acc[2].sum()) / v
        };
        if x.len() * grid.len() >= 4096 {
            x.par_iter().map(one).collect()
        } else {
            x.iter().map(one).collect()
        }
    }

    /// Cell-fractional coordinates of `x + t * dir` with `dir` Cartesian.
    fn step(&self, x: &[Vector3<f64>], dir: &[Vector3<f64>], t: f64) -> Vec<Vector3<f64>> {
        x.iter()
            .zip(dir)
            .map(|(xj, dj)| wrap_unit(self.d, &(xj + self.edges.to_fractional(&(dj * t)))))
            .collect()
    }

    fn cartesian(&self, x: &[Vector3<f64>]) -> Vec<Vec<f64>> {
        x.iter()
            .map(|f| truncate(self.d, &self.grid.cell().from_cell_fractional(f)))
            .collect()
    }
}

fn max_norm(g: &[Vector3<f64>]) -> f64 {
    g.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

fn dot(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).collect::<NeumaierSum>().sum()
}

fn residual(s: &[Complex64], n: usize) -> f64 {
    let n2 = (n * n) as f64;
    s.iter().map(|z| z.norm_sqr() / n2).fold(0.0, f64::max)
}

/// Analytic gradient of `U_Lambda` with respect to Cartesian positions.
pub fn gradient(potential: &PairPotential, cell: &PeriodCell, points: &[Vector3<f64>]) -> Result<Vec<Vector3<f64>>> {
    let grid = DualGrid::new(potential, cell)?;
    let land = Landscape::new(&grid);
    let x = grid.to_fractional(points);
    let s = land.structure_factors(&x);
    Ok(land.gradient(&x, &s))
}

/// Mutable state of a run: cell-fractional positions, structure factors and
/// the fluctuation part of the energy.
#[derive(Clone)]
struct State {
    x: Vec<Vector3<f64>>,
    s: Vec<Complex64>,
    fluct: f64,
}

/// Metropolis single-particle moves with geometric cooling, starting at
/// `temperature`. Returns the energies after each sweep.
fn anneal(
    land: &Landscape,
    state: &mut State,
    temperature: f64,
    rng: &mut ChaCha8Rng,
    max_sweeps: usize,
    spacing: f64,
) -> Result<Vec<f64>> {
    let n = state.x.len();
    let grid = land.grid;
    let mut temperature = temperature;
    let mut energies = Vec::new();
    if !(temperature > 0.0) || n < 2 {
        return Ok(energies);
    }
    let normal = Normal::new(0.0, STEP_FRACTION * spacing).expect("finite spacing");
    let inv_2v = 1.0 / (2.0 * grid.volume());
    let mut trial_s = vec![Complex64::new(0.0, 0.0); grid.len()];
    for _ in 0..max_sweeps {
        let mut accepted = 0usize;
        for _ in 0..n {
            let j = rng.random_range(0..n);
            let mut delta = Vector3::zeros();
            for c in 0..land.d {
                delta[c] = normal.sample(rng);
            }
            let moved = wrap_unit(land.d, &(state.x[j] + land.edges.to_fractional(&delta)));
            let mut change = NeumaierSum::new();
            for (i, (nk, w)) in grid.coeffs().iter().zip(grid.phi_hat_values()).enumerate() {
                let old = Complex64::from_polar(1.0, phase(nk, &state.x[j]));
                let new = Complex64::from_polar(1.0, phase(nk, &moved));
                trial_s[i] = state.s[i] - old + new;
                change.add(w * (trial_s[i].norm_sqr() - state.s[i].norm_sqr()));
            }
            let de = change.sum() * inv_2v;
            if de <= 0.0 || rng.random::<f64>() < (-de / temperature).exp() {
                state.x[j] = moved;
                state.s.copy_from_slice(&trial_s);
                accepted += 1;
            }
        }
        // resynchronize against accumulated rounding
        let (f, fresh) = land.fluctuation(&state.x)?;
        state.fluct = f;
        state.s = fresh;
        energies.push(f + grid.floor(n));
        temperature *= COOLING;
        if (accepted as f64) < MIN_ACCEPTANCE * n as f64 {
            break;
        }
    }
    Ok(energies)
}

struct Descent {
    energies: Vec<f64>,
    iterations: usize,
    converged: bool,
    gradient_norm: f64,
}

/// Steepest descent with Barzilai-Borwein trial steps and Armijo
/// backtracking. Stops on a small gradient, on the iteration budget, when no
/// step satisfies the Armijo condition, or after `STALL_ITERATIONS`
/// iterations without a resolvable decrease.
fn descend(
    land: &Landscape,
    state: &mut State,
    max_iterations: usize,
    max_step: f64,
    threshold: f64,
) -> Result<Descent> {
    let d = land.d;
    let n = state.x.len();
    let floor = land.grid.floor(n);
    let resolution = STALL_RESOLUTION * (floor.abs() + n as f64 * land.grid.phi_hat_zero().abs() / land.grid.volume());
    let mut energies = vec![state.fluct + floor];
    let mut g = land.gradient(&state.x, &state.s);
    let mut gnorm = max_norm(&g);
    let mut alpha_prev: Option<f64> = None;
    let mut prev: Option<(Vec<Vector3<f64>>, Vec<Vector3<f64>>)> = None;
    let mut iterations = 0;
    let mut stalled = 0;
    let mut converged = gnorm < threshold;
    while !converged && iterations < max_iterations && stalled < STALL_ITERATIONS {
        // Barzilai-Borwein trial step, capped at the initial displacement
        let mut alpha = max_step / gnorm;
        if let Some((x_old, g_old)) = &prev {
            let sx: Vec<Vector3<f64>> = state
                .x
                .iter()
                .zip(x_old)
                .map(|(a, b)| {
                    let mut df = a - b;
                    for c in 0..d {
                        df[c] -= df[c].round();
                    }
                    land.edges.to_cartesian(&df)
                })
                .collect();
            let y: Vec<Vector3<f64>> = g.iter().zip(g_old).map(|(a, b)| a - b).collect();
            let sy = dot(&sx, &y);
            if sy > 0.0 {
                alpha = alpha.min(dot(&sx, &sx) / sy);
            } else if let Some(a) = alpha_prev {
                alpha = alpha.min(2.0 * a);
            }
        }
        let descent: Vec<Vector3<f64>> = g.iter().map(|gj| -gj).collect();
        let slope = dot(&g, &g);
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial = land.step(&state.x, &descent, alpha);
            let (f, st) = land.fluctuation(&trial)?;
            if f <= state.fluct - ARMIJO_C * alpha * slope {
                accepted = Some((trial, f, st));
                break;
            }
            alpha *= BACKTRACK_FACTOR;
        }
        let Some((trial, f, st)) = accepted else {
            break;
        };
        iterations += 1;
        if state.fluct - f <= resolution {
            stalled += 1;
        } else {
            stalled = 0;
        }
        prev = Some((std::mem::replace(&mut state.x, trial), std::mem::take(&mut g)));
        state.fluct = f;
        state.s = st;
        alpha_prev = Some(alpha);
        g = land.gradient(&state.x, &state.s);
        gnorm = max_norm(&g);
        energies.push(state.fluct + floor);
        converged = gnorm < threshold;
    }
    Ok(Descent {
        energies,
        iterations,
        converged,
        gradient_norm: gnorm,
    })
}

/// Minimize `U_Lambda` over `n` positions from a seeded uniform start.
pub fn minimize(
    potential: &PairPotential,
    cell: &PeriodCell,
    n: usize,
    settings: &MinimizeSettings,
) -> Result<MinimizationRun> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one particle".into()));
    }
    let d = cell.dimension();
    let mut rng = trial_rng(settings.seed, 0);
    let start: Vec<Vector3<f64>> = (0..n)
        .map(|_| {
            let mut f = Vector3::zeros();
            for c in 0..d {
                f[c] = rng.random::<f64>();
            }
            f
        })
        .collect();
    minimize_from(potential, cell, &start, settings)
}

/// Minimize `U_Lambda` from given cell-fractional positions.
///
/// With annealing, each cycle anneals from the current state and then
/// descends. Later cycles reheat to the remaining fluctuation energy per
/// particle. Cycling stops once the floor gap drops below
/// `floor_tolerance |floor|`; the best cycle is reported.
pub fn minimize_from(
    potential: &PairPotential,
    cell: &PeriodCell,
    start: &[Vector3<f64>],
    settings: &MinimizeSettings,
) -> Result<MinimizationRun> {
    let n = start.len();
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one particle".into()));
    }
    if !(settings.gradient_tolerance > 0.0) {
        return Err(Error::InvalidParameter("gradient tolerance must be positive".into()));
    }
    let grid = DualGrid::new(potential, cell)?;
    let land = Landscape::new(&grid);
    let d = cell.dimension();
    let v = grid.volume();
    let spacing = (v / n as f64).powf(1.0 / d as f64);
    let max_step = STEP_FRACTION * spacing;
    let threshold = settings.gradient_tolerance * grid.phi_hat_zero().abs() * n as f64 / v;
    let floor = grid.floor(n);
    let target = settings.floor_tolerance * floor.abs();

    let x: Vec<Vector3<f64>> = start.iter().map(|f| wrap_unit(d, f)).collect();
    let initial_positions = land.cartesian(&x);
    let (fluct, s) = land.fluctuation(&x)?;
    let mut state = State { x, s, fluct };

    let cycles = match settings.method {
        Method::Descent => 1,
        Method::AnnealThenDescent => settings.max_cycles.max(1),
    };
    let mut rng = trial_rng(settings.seed, 1);
    let mut best: Option<(State, Vec<f64>, Descent)> = None;
    let mut iterations = 0;
    let mut cycles_run = 0;
    for cycle in 0..cycles {
        cycles_run += 1;
        let mut annealing = Vec::new();
        if settings.method == Method::AnnealThenDescent {
            let t0 = match (cycle, settings.initial_temperature) {
                (0, Some(t)) => t,
                _ => state.fluct / n as f64,
            };
            annealing = anneal(&land, &mut state, t0, &mut rng, settings.max_sweeps, spacing)?;
        }
        let descent = descend(&land, &mut state, settings.max_iterations - iterations, max_step, threshold)?;
        iterations += descent.iterations;
        let improved = best.as_ref().is_none_or(|(b, _, _)| state.fluct < b.fluct);
        if improved {
            best = Some((state.clone(), annealing, descent));
        } else if let Some((b, _, _)) = &best {
            state = b.clone();
        }
        if state.fluct <= target || iterations >= settings.max_iterations {
            break;
        }
    }
    let (state, annealing_energies, descent) = best.expect("at least one cycle");

    Ok(MinimizationRun {
        seed: settings.seed,
        method: settings.method,
        dimension: d,
        particles: n,
        cell: land.edges.generators(),
        volume: v,
        dual_vectors: grid.len(),
        initial_positions,
        final_positions: land.cartesian(&state.x),
        annealing_sweeps: annealing_energies.len(),
        annealing_energies,
        energies: descent.energies,
        cycles: cycles_run,
        final_energy: state.fluct + floor,
        floor,
        floor_gap: state.fluct,
        residual: residual(&state.s, n),
        gradient_norm: descent.gradient_norm,
        gradient_threshold: threshold,
        iterations,
        converged: descent.converged || state.fluct <= target,
    })
}

/// Independent runs, one per seed, executed concurrently.
pub fn minimize_restarts(
    potential: &PairPotential,
    cell: &PeriodCell,
    n: usize,
    settings: &MinimizeSettings,
    seeds: &[u64],
) -> Result<Vec<MinimizationRun>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let s = MinimizeSettings {
                seed,
                ..settings.clone()
            };
            minimize(potential, cell, n, &s)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureFactorRow {
    pub coeffs: Coeffs,
    pub vector: Vec<f64>,
    pub norm: f64,
    pub phi_hat: f64,
    pub structure_factor_sq: f64,
    /// Whether `k` lies in the dual of the generating lattice.
    pub in_lattice_dual: Option<bool>,
    /// `N_{B cap Lambda}^2 |sum_j e^{i k . y_j}|^2` on `B*`, zero elsewhere.
    pub predicted: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureFactorMap {
    pub particles: usize,
    pub rows: Vec<StructureFactorRow>,
    pub residual: f64,
    /// Largest `|computed - predicted| / N^2`, when a periodic source is given.
    pub max_factorization_error: Option<f64>,
}

/// `|S(k)|^2` on every nonzero in-ball dual vector of the cell.
pub fn structure_factor_map(potential: &PairPotential, cell: &PeriodCell, points: &[Vector3<f64>]) -> Result<StructureFactorMap> {
    let grid = DualGrid::new(potential, cell)?;
    let d = cell.dimension();
    let x = grid.to_fractional(points);
    let s = grid.structure_factors(&x);
    let rows = (0..grid.len())
        .map(|i| StructureFactorRow {
            coeffs: grid.coeffs()[i],
            vector: truncate(d, &grid.vectors()[i]),
            norm: grid.norms()[i],
            phi_hat: grid.phi_hat_values()[i],
            structure_factor_sq: s[i].norm_sqr(),
            in_lattice_dual: None,
            predicted: None,
        })
        .collect();
    Ok(StructureFactorMap {
        particles: points.len(),
        rows,
        residual: residual(&s, points.len()),
        max_factorization_error: None,
    })
}

/// Structure-factor map of `X cap Lambda` for a periodic `X` whose lattice
/// generates the cell, with the factorization over `B*` checked row by row.
pub fn structure_factor_map_periodic(
    potential: &PairPotential,
    cell: &PeriodCell,
    config: &PeriodicConfiguration,
) -> Result<StructureFactorMap> {
    if cell.basis() != config.basis() {
        return Err(Error::InvalidParameter("cell must be built on the configuration's lattice".into()));
    }
    let d = cell.dimension();
    let l = cell.multipliers();
    let cells = cell.lattice_point_count() as f64;
    let offsets = config.fractional_offsets();
    let points = cell.points_of(config);
    let n2 = (points.len() * points.len()) as f64;
    let mut map = structure_factor_map(potential, cell, &points)?;
    let mut worst = 0.0f64;
    for row in &mut map.rows {
        let in_dual = (0..d).all(|a| row.coeffs[a].rem_euclid(l[a] as i64) == 0);
        let predicted = if in_dual {
            let mut m: Coeffs = [0; 3];
            for a in 0..d {
                m[a] = row.coeffs[a] / l[a] as i64;
            }
            cells * cells * structure_factor(&m, &offsets).norm_sqr()
        } else {
            0.0
        };
        worst = worst.max((row.structure_factor_sq - predicted).abs() / n2);
        row.in_lattice_dual = Some(in_dual);
        row.predicted = Some(predicted);
    }
    map.max_factorization_error = Some(worst);
    Ok(map)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::energy::box_energy_on;
    use crate::fixtures;
    use crate::lattice::LatticeName;

    const K0: f64 = 2.0 * PI;

    fn conventional_bcc(rho: f64) -> PeriodicConfiguration {
        LatticeName::Bcc.conventional(1.0).unwrap().scale_to_density(rho).unwrap()
    }

    fn finite_difference(grid: &DualGrid, points: &[Vector3<f64>], j: usize, c: usize, h: f64) -> f64 {
        let mut p = points.to_vec();
        p[j][c] += h;
        let up = box_energy_on(grid, &p).energy;
        p[j][c] -= 2.0 * h;
        let down = box_energy_on(grid, &p).energy;
        (up - down) / (2.0 * h)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let pot = fixtures::longrange_potential(K0).unwrap();
        let basis = LatticeName::Sc.configuration(1.3).unwrap().basis().clone();
        let cell = PeriodCell::new(basis, &[1, 1, 1]).unwrap();
        let grid = DualGrid::new(&pot, &cell).unwrap();
        let mut rng = trial_rng(3, 0);
        let points: Vec<Vector3<f64>> = (0..4)
            .map(|_| Vector3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()) * 1.3)
            .collect();
        let g = gradient(&pot, &cell, &points).unwrap();
        let scale = max_norm(&g);
        let h = 1e-6 * 1.3;
        for j in 0..4 {
            for c in 0..3 {
                let fd = finite_difference(&grid, &points, j, c, h);
                assert!((fd - g[j][c]).abs() <= 1e-6 * scale, "{fd} vs {}", g[j][c]);
            }
        }
    }

    #[test]
    fn lattice_points_and_single_particles_are_stationary() {
        let pot = fixtures::longrange_potential(K0).unwrap();
        let rho3 = LatticeName::Bcc.closed_form_threshold(K0).unwrap();
        let x = LatticeName::Bcc.configuration(1.0).unwrap().scale_to_density(rho3).unwrap();
        let cell = PeriodCell::new(x.basis().clone(), &[2, 2, 2]).unwrap();
        let g = gradient(&pot, &cell, &cell.points_of(&x)).unwrap();
        let scale = pot.phi_hat_at_zero() * 8.0 / cell.volume();
        assert!(max_norm(&g) < 1e-12 * scale);
        let g1 = gradient(&pot, &cell, &[Vector3::new(0.3, -0.2, 0.1)]).unwrap();
        assert!(max_norm(&g1) < 1e-12 * scale);
    }

    #[test]
    fn single_particle_run_sits_at_zero_energy() {
        let pot = fixtures::longrange_potential(K0).unwrap();
        let cell = PeriodCell::new(LatticeName::Sc.configuration(1.0).unwrap().basis().clone(), &[1, 1, 1]).unwrap();
        let run = minimize(&pot, &cell, 1, &MinimizeSettings::default()).unwrap();
        assert!(run.converged);
        assert_eq!(run.iterations, 0);
        let grid = DualGrid::new(&pot, &cell).unwrap();
        let scale = grid.phi_hat_zero() / grid.volume();
        assert!(run.final_energy.abs() < 1e-12 * scale);
        assert!((run.floor - (grid.phi_hat_zero() - grid.phi_hat_sum()) / (2.0 * grid.volume())).abs() < 1e-12 * scale);
    }

    #[test]
    fn descent_reaches_the_floor_in_a_commensurate_cell() {
        let pot = fixtures::longrange_potential(K0).unwrap();
        let rho3 = LatticeName::Bcc.closed_form_threshold(K0).unwrap();
        let x = conventional_bcc(rho3);
        let cell = PeriodCell::new(x.basis().clone(), &[2, 2, 2]).unwrap();
        let n = cell.points_of(&x).len();
        assert_eq!(n, 16);
        let run = minimize(&pot, &cell, n, &MinimizeSettings::default()).unwrap();
        assert!(run.floor_gap < 1e-8 * run.floor.abs(), "{run:?}");
        assert!(run.residual < 1e-10, "{}", run.residual);
        assert!(run.energies.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn annealing_then_descent_reaches_the_floor() {
        let pot = fixtures::longrange_potential(K0).unwrap();
        let rho3 = LatticeName::Bcc.closed_form_threshold(K0).unwrap();
        let x = conventional_bcc(rho3);
        let cell = PeriodCell::new(x.basis().clone(), &[2, 2, 2]).unwrap();
        let settings = MinimizeSettings {
            method: Method::AnnealThenDescent,
            seed: 4,
            ..MinimizeSettings::default()
        };
        let run = minimize(&pot, &cell, 16, &settings).unwrap();
        assert!(run.annealing_sweeps > 0);
        assert!(run.floor_gap < 1e-8 * run.floor.abs());
        assert!(run.residual < 1e-10);
    }

    #[test]
    fn different_seeds_reach_the_same_energy_at_different_positions() {
        let pot = fixtures::longrange_potential(K0).unwrap();
        let rho3 = LatticeName::Bcc.closed_form_threshold(K0).unwrap();
        let x = conventional_bcc(1.1 * rho3);
        let cell = PeriodCell::new(x.basis().clone(), &[2, 2, 2]).unwrap();
        let settings = MinimizeSettings {
            method: Method::AnnealThenDescent,
            ..MinimizeSettings::default()
        };
        let runs = minimize_restarts(&pot, &cell, 16, &settings, &[11, 12]).unwrap();
        assert!((runs[0].final_energy - runs[1].final_energy).abs() < 1e-8 * runs[0].floor.abs());
        assert_ne!(runs[0].final_positions, runs[1].final_positions);
    }

    #[test]
    fn two_particles_in_a_small_cube_stop_above_the_floor() {
        // a = 1.6: the (100) and (110) shells are inside the ball, (111) is not.
        // Two particles at relative offset (1/2, 1/2, 1/2) cancel (100) and
        // leave |S|^2 = 4 on the twelve (110) vectors.
        let pot = fixtures::longrange_potential(K0).unwrap();
        let a = 1.6;
        let cell = PeriodCell::new(LatticeName::Sc.configuration(a).unwrap().basis().clone(), &[1, 1, 1]).unwrap();
        let oracle = 24.0 * pot.phi_hat(2f64.sqrt() * 2.0 * PI / a) / (a * a * a);
        for seed in 0..3 {
            let settings = MinimizeSettings {
                seed,
                ..MinimizeSettings::default()
            };
            let run = minimize(&pot, &cell, 2, &settings).unwrap();
            assert!(run.converged);
            assert!((run.floor_gap - oracle).abs() < 1e-9 * oracle, "{} vs {oracle}", run.floor_gap);
            assert!((run.floor_gap - 1285.746017123252).abs() < 1e-6);
        }
    }

    #[test]
    fn factorization_over_the_lattice_dual() {
        let pot = fixtures::longrange_potential(K0).unwrap();
        let x = conventional_bcc(1.2);
        let cell = PeriodCell::new(x.basis().clone(), &[2, 2, 2]).unwrap();
        let map = structure_factor_map_periodic(&pot, &cell, &x).unwrap();
        let n2 = 256.0;
        assert!(map.max_factorization_error.unwrap() < 1e-12);
        for row in &map.rows {
            if !row.in_lattice_dual.unwrap() {
                assert!(row.structure_factor_sq <= 1e-20 * n2);
            }
        }
    }

    #[test]
    fn hcp_axial_reflection_is_extinct() {
        let pot = fixtures::longrange_potential(K0).unwrap();
        let x = LatticeName::Hcp {
            c_over_a: crate::lattice::HCP_IDEAL_C_OVER_A,
        }
        .configuration(2.0)
        .unwrap();
        assert!((x.fractional_offsets()[1][2] - 0.5).abs() < 1e-12);
        let cell = PeriodCell::new(x.basis().clone(), &[1, 1, 1]).unwrap();
        let map = structure_factor_map_periodic(&pot, &cell, &x).unwrap();
        let axial = map.rows.iter().find(|r| r.coeffs == [0, 0, 1]).expect("axial vector inside the ball");
        assert!(axial.predicted.unwrap() < 1e-28);
        assert!(axial.structure_factor_sq < 1e-28);
    }

    #[test]
    fn bravais_rows_have_full_weight() {
        let pot = fixtures::longrange_potential(K0).unwrap();
        let x = PeriodicConfiguration::bravais(LatticeName::Sc.configuration(1.5).unwrap().basis().clone());
        let cell = PeriodCell::new(x.basis().clone(), &[1, 1, 1]).unwrap();
        let map = structure_factor_map_periodic(&pot, &cell, &x).unwrap();
        assert!(!map.rows.is_empty());
        for row in &map.rows {
            assert_eq!(row.in_lattice_dual, Some(true));
            assert!((row.structure_factor_sq - 1.0).abs() < 1e-12);
        }
    }
}
