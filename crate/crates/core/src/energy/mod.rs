//! Finite reciprocal-space energies of periodic and boxed configurations.
//!
//! Every sum runs over dual-lattice vectors strictly inside the ball
//! `|k| < K0`; all other terms vanish identically.

mod oracle;
mod thermo;

use std::f64::consts::PI;

use nalgebra::Vector3;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Coeffs, PeriodCell, PeriodicConfiguration};
use crate::numerics::NeumaierSum;
use crate::spectral::PairPotential;

pub use oracle::{periodized_phi_realspace, realspace_energy_oracle, tail_integral, OracleResult, RealSpaceSum};
pub use thermo::{e_mu, e_rho, legendre_check, linspace, LegendreReport, LegendreRow, Thermodynamics};

/// Dual-grid sizes above which structure factors are computed in parallel.
const PARALLEL_THRESHOLD: usize = 512;

/// `2 pi sum_a n_a x_a`, reduced to `[-pi, pi]` before the trigonometric call.
#[inline]
pub fn phase(n: &Coeffs, x: &Vector3<f64>) -> f64 {
    let t = n[0] as f64 * x[0] + n[1] as f64 * x[1] + n[2] as f64 * x[2];
    2.0 * PI * (t - t.round())
}

/// `sum_r exp(i k . r)` for positions in fractional coordinates of the
/// generators dual to `n`.
pub fn structure_factor(n: &Coeffs, fractional: &[Vector3<f64>]) -> Complex64 {
    let mut re = NeumaierSum::new();
    let mut im = NeumaierSum::new();
    for x in fractional {
        let (s, c) = phase(n, x).sin_cos();
        re.add(c);
        im.add(s);
    }
    Complex64::new(re.sum(), im.sum())
}

fn check_dimension(potential: &PairPotential, d: usize) -> Result<()> {
    if potential.dimension() != d {
        return Err(Error::InvalidParameter(format!(
            "potential is {}-dimensional but the configuration is {d}-dimensional",
            potential.dimension()
        )));
    }
    Ok(())
}

/// `Lambda* cap { |k| < K0 }` with the profile sampled on it.
#[derive(Debug, Clone)]
pub struct DualGrid {
    cell: PeriodCell,
    coeffs: Vec<Coeffs>,
    vectors: Vec<Vector3<f64>>,
    norms: Vec<f64>,
    phi_hat: Vec<f64>,
    phi_hat_zero: f64,
    phi_hat_sum: f64,
    volume: f64,
}

impl DualGrid {
    pub fn new(potential: &PairPotential, cell: &PeriodCell) -> Result<DualGrid> {
        check_dimension(potential, cell.dimension())?;
        let points = cell.dual_in_ball(potential.cutoff());
        let mut coeffs = Vec::with_capacity(points.len());
        let mut vectors = Vec::with_capacity(points.len());
        let mut norms = Vec::with_capacity(points.len());
        let mut phi_hat = Vec::with_capacity(points.len());
        let mut sum = NeumaierSum::new();
        for p in points {
            let v = potential.phi_hat(p.norm);
            sum.add(v);
            if p.coeffs == [0, 0, 0] {
                continue;
            }
            coeffs.push(p.coeffs);
            vectors.push(p.vector);
            norms.push(p.norm);
            phi_hat.push(v);
        }
        Ok(DualGrid {
            cell: cell.clone(),
            coeffs,
            vectors,
            norms,
            phi_hat,
            phi_hat_zero: potential.phi_hat_at_zero(),
            phi_hat_sum: sum.sum(),
            volume: cell.volume(),
        })
    }

    pub fn cell(&self) -> &PeriodCell {
        &self.cell
    }

    /// Number of nonzero dual vectors inside the ball.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[Coeffs] {
        &self.coeffs
    }

    pub fn vectors(&self) -> &[Vector3<f64>] {
        &self.vectors
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn phi_hat_values(&self) -> &[f64] {
        &self.phi_hat
    }

    pub fn phi_hat_zero(&self) -> f64 {
        self.phi_hat_zero
    }

    /// `sum_{k in Lambda*, |k| < K0} phi_hat(k)`, the origin included.
    pub fn phi_hat_sum(&self) -> f64 {
        self.phi_hat_sum
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Cell-fractional coordinates in `[0, 1)` of Cartesian points.
    pub fn to_fractional(&self, points: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
        points.iter().map(|r| self.cell.to_cell_fractional(r)).collect()
    }

    /// Structure factors on every nonzero in-ball dual vector.
    pub fn structure_factors(&self, fractional: &[Vector3<f64>]) -> Vec<Complex64> {
        if self.coeffs.len() * fractional.len() >= PARALLEL_THRESHOLD * 16 {
            self.coeffs.par_iter().map(|n| structure_factor(n, fractional)).collect()
        } else {
            self.coeffs.iter().map(|n| structure_factor(n, fractional)).collect()
        }
    }

    /// `phi_Lambda(r) = V^{-1} sum phi_hat(k) cos(k . r)`.
    pub fn periodized_phi(&self, r: &Vector3<f64>) -> f64 {
        let x = self.cell.to_cell_fractional(r);
        let mut acc = NeumaierSum::new();
        acc.add(self.phi_hat_zero);
        for (n, w) in self.coeffs.iter().zip(&self.phi_hat) {
            acc.add(w * phase(n, &x).cos());
        }
        acc.sum() / self.volume
    }

    /// `(N/2V)[N phi_hat(0) - sum phi_hat(k)]`, the minimum of `U_Lambda` at fixed `N`.
    pub fn floor(&self, n: usize) -> f64 {
        let n = n as f64;
        n / (2.0 * self.volume) * (n * self.phi_hat_zero - self.phi_hat_sum)
    }

    /// `(1/2V) sum_{k != 0} phi_hat(k) |S(k)|^2` from precomputed structure factors.
    pub fn fluctuation_from(&self, s: &[Complex64]) -> f64 {
        let mut acc = NeumaierSum::new();
        for (w, sk) in self.phi_hat.iter().zip(s) {
            acc.add(w * sk.norm_sqr());
        }
        acc.sum() / (2.0 * self.volume)
    }

    /// `U_Lambda` for positions in cell-fractional coordinates.
    pub fn energy_fractional(&self, fractional: &[Vector3<f64>]) -> f64 {
        let s = self.structure_factors(fractional);
        self.fluctuation_from(&s) + self.floor(fractional.len())
    }
}

/// One in-ball dual vector with its structure factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureFactorEntry {
    pub norm: f64,
    pub coeffs: Coeffs,
    pub phi_hat: f64,
    pub structure_factor_sq: f64,
    pub contribution: f64,
}

/// `U_Lambda(R)` split into its two terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxEnergy {
    pub energy: f64,
    /// `(1/2V) sum_{k != 0} phi_hat(k) |S(k)|^2`, always nonnegative.
    pub fluctuation: f64,
    /// `(N/2V)[N phi_hat(0) - sum phi_hat(k)]`.
    pub floor: f64,
    pub particles: usize,
    pub volume: f64,
    pub entries: Vec<StructureFactorEntry>,
}

/// `U_Lambda(R)`; points outside the cell are reduced into it.
pub fn box_energy(potential: &PairPotential, cell: &PeriodCell, points: &[Vector3<f64>]) -> Result<BoxEnergy> {
    let grid = DualGrid::new(potential, cell)?;
    Ok(box_energy_on(&grid, points))
}

pub fn box_energy_on(grid: &DualGrid, points: &[Vector3<f64>]) -> BoxEnergy {
    let frac = grid.to_fractional(points);
    let s = grid.structure_factors(&frac);
    let fluctuation = grid.fluctuation_from(&s);
    let floor = grid.floor(points.len());
    let entries = (0..grid.len())
        .map(|i| StructureFactorEntry {
            norm: grid.norms[i],
            coeffs: grid.coeffs[i],
            phi_hat: grid.phi_hat[i],
            structure_factor_sq: s[i].norm_sqr(),
            contribution: grid.phi_hat[i] * s[i].norm_sqr() / (2.0 * grid.volume),
        })
        .collect();
    BoxEnergy {
        energy: fluctuation + floor,
        fluctuation,
        floor,
        particles: points.len(),
        volume: grid.volume,
        entries,
    }
}

/// `phi_Lambda(r)` by the finite reciprocal sum.
pub fn periodized_phi(potential: &PairPotential, cell: &PeriodCell, r: &Vector3<f64>) -> Result<f64> {
    Ok(DualGrid::new(potential, cell)?.periodized_phi(r))
}

/// `mu_Lambda = mu + (1/2)[phi(0) - V^{-1} sum phi_hat(k)]`.
pub fn mu_lambda(potential: &PairPotential, cell: &PeriodCell, mu: f64) -> Result<f64> {
    let grid = DualGrid::new(potential, cell)?;
    Ok(mu + 0.5 * (potential.phi_at_zero() - grid.phi_hat_sum() / grid.volume()))
}

/// One nonzero reciprocal vector inside the ball and its share of `e(X)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellTerm {
    pub norm: f64,
    pub coeffs: Coeffs,
    pub phi_hat: f64,
    /// `|sum_j exp(i k . y_j)|^2`.
    pub weight: f64,
    pub contribution: f64,
}

/// Energy density of a periodic configuration and its itemized parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub energy_density: f64,
    pub density: f64,
    pub lattice_density: f64,
    pub points_per_cell: usize,
    pub cutoff: f64,
    pub shortest_reciprocal: f64,
    pub admissible: bool,
    pub phi_hat_at_zero: f64,
    pub phi_at_zero: f64,
    /// `(1/2) rho^2 phi_hat(0)`.
    pub zero_term: f64,
    /// `-(1/2) phi(0) rho`.
    pub self_term: f64,
    /// Sum of the nonzero-vector contributions; equals `e - plateau`.
    pub shell_sum: f64,
    /// `(1/2) rho [rho phi_hat(0) - phi(0)]`.
    pub plateau: f64,
    pub terms: Vec<ShellTerm>,
}

/// `e(X) = (1/2) rho(B)^2 sum_{k in B*} phi_hat(k) |sum_j e^{i k.y_j}|^2 - (1/2) phi(0) rho`.
pub fn energy_density(potential: &PairPotential, config: &PeriodicConfiguration) -> Result<EnergyReport> {
    check_dimension(potential, config.dimension())?;
    let recip = config.reciprocal()?;
    let rho_b = config.basis().density();
    let rho = config.density();
    let offsets = config.fractional_offsets();
    let k0 = potential.cutoff();

    let mut terms = Vec::new();
    let mut shell = NeumaierSum::new();
    for p in recip.enumerate_in_ball(k0) {
        if p.coeffs == [0, 0, 0] {
            continue;
        }
        let phi_hat = potential.phi_hat(p.norm);
        let weight = structure_factor(&p.coeffs, &offsets).norm_sqr();
        let contribution = 0.5 * rho_b * rho_b * phi_hat * weight;
        shell.add(contribution);
        terms.push(ShellTerm {
            norm: p.norm,
            coeffs: p.coeffs,
            phi_hat,
            weight,
            contribution,
        });
    }
    let phi_hat_at_zero = potential.phi_hat_at_zero();
    let phi_at_zero = potential.phi_at_zero();
    let zero_term = 0.5 * rho * rho * phi_hat_at_zero;
    let self_term = -0.5 * phi_at_zero * rho;
    let shell_sum = shell.sum();
    let q = recip.shortest_norm();
    Ok(EnergyReport {
        energy_density: zero_term + shell_sum + self_term,
        density: rho,
        lattice_density: rho_b,
        points_per_cell: config.points_per_cell(),
        cutoff: k0,
        shortest_reciprocal: q,
        admissible: q >= k0,
        phi_hat_at_zero,
        phi_at_zero,
        zero_term,
        self_term,
        shell_sum,
        plateau: 0.5 * rho * (rho * phi_hat_at_zero - phi_at_zero),
        terms,
    })
}

/// `U(r|X)` for a periodic configuration with the constant it should equal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub value: f64,
    /// `rho(X) phi_hat(0)`.
    pub expected: f64,
    pub deviation: f64,
}

/// Evaluator of the field `U(r|X) = sum_{x in X} phi(r - x)` of a periodic
/// configuration, as a finite sum over one primitive cell.
#[derive(Debug, Clone)]
pub struct ExternalField {
    grid: DualGrid,
    offsets: Vec<Vector3<f64>>,
    expected: f64,
}

impl ExternalField {
    pub fn new(potential: &PairPotential, config: &PeriodicConfiguration) -> Result<ExternalField> {
        let d = config.dimension();
        let cell = PeriodCell::new(config.basis().clone(), &vec![1; d])?;
        Ok(ExternalField {
            grid: DualGrid::new(potential, &cell)?,
            offsets: config.fractional_offsets(),
            expected: config.density() * potential.phi_hat_at_zero(),
        })
    }

    pub fn expected(&self) -> f64 {
        self.expected
    }

    pub fn eval(&self, r: &Vector3<f64>) -> FieldSample {
        let x = self.grid.cell.to_cell_fractional(r);
        let mut acc = NeumaierSum::new();
        let j = self.offsets.len() as f64;
        acc.add(j * self.grid.phi_hat_zero);
        for (n, w) in self.grid.coeffs.iter().zip(&self.grid.phi_hat) {
            for y in &self.offsets {
                acc.add(w * phase(n, &(x - y)).cos());
            }
        }
        let value = acc.sum() / self.grid.volume;
        FieldSample {
            value,
            expected: self.expected,
            deviation: value - self.expected,
        }
    }
}

pub fn external_field(potential: &PairPotential, config: &PeriodicConfiguration, r: &Vector3<f64>) -> Result<FieldSample> {
    Ok(ExternalField::new(potential, config)?.eval(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::lattice::LatticeName;
    use crate::spectral::SpectralProfile;

    const K0: f64 = 2.0 * PI;

    fn bcc_at_threshold() -> PeriodicConfiguration {
        let rho3 = LatticeName::Bcc.closed_form_threshold(K0).unwrap();
        LatticeName::Bcc.configuration(1.0).unwrap().scale_to_density(rho3).unwrap()
    }

    #[test]
    fn threshold_bcc_has_no_nonzero_vector_inside_the_ball() {
        let bcc = bcc_at_threshold();
        let pts = bcc.reciprocal().unwrap().enumerate_in_ball(K0);
        assert_eq!(pts.len(), 1);
    }

    #[test]
    fn plateau_for_bcc_at_threshold() {
        let pot = fixtures::longrange_potential(K0).unwrap();
        let bcc = bcc_at_threshold();
        let r = energy_density(&pot, &bcc).unwrap();
        assert!(r.admissible);
        assert!(r.terms.is_empty());
        assert!((r.energy_density - r.plateau).abs() <= 1e-15 * r.plateau.abs());
        let parts = r.zero_term + r.self_term + r.shell_sum;
        assert!((parts - r.energy_density).abs() <= 1e-12 * r.energy_density.abs());
    }

    #[test]
    fn fcc_below_its_threshold_exceeds_the_plateau() {
        let pot = fixtures::longrange_potential(K0).unwrap();
        let rho3 = LatticeName::Bcc.closed_form_threshold(K0).unwrap();
        let fcc = LatticeName::Fcc.configuration(1.0).unwrap().scale_to_density(rho3).unwrap();
        let r = energy_density(&pot, &fcc).unwrap();
        assert!(!r.admissible);
        assert!(r.shell_sum > 0.0);
        assert!(r.energy_density > r.plateau);
        assert!(r.terms.iter().all(|t| t.norm < K0));
    }

    #[test]
    fn zero_profile_gives_zero_energy() {
        let pot = PairPotential::new(SpectralProfile::polynomial(3, K0, vec![0.0]).unwrap());
        let sc = LatticeName::Sc.configuration(0.7).unwrap();
        assert_eq!(energy_density(&pot, &sc).unwrap().energy_density, 0.0);
        let cell = PeriodCell::new(sc.basis().clone(), &[2, 2, 2]).unwrap();
        assert_eq!(periodized_phi(&pot, &cell, &Vector3::new(0.1, 0.2, 0.3)).unwrap(), 0.0);
        assert_eq!(mu_lambda(&pot, &cell, 0.25).unwrap(), 0.25);
        assert_eq!(external_field(&pot, &sc, &Vector3::new(0.3, 0.0, 0.1)).unwrap().value, 0.0);
    }

    #[test]
    fn only_the_origin_survives_in_a_slightly_compressed_cubic_cell() {
        let pot = fixtures::longrange_potential(K0).unwrap();
        let a = (2.0 * PI / K0) * 0.99;
        let cell = PeriodCell::new(LatticeName::Sc.configuration(a).unwrap().basis().clone(), &[1, 1, 1]).unwrap();
        let v = periodized_phi(&pot, &cell, &Vector3::zeros()).unwrap();
        assert!((v - pot.phi_hat_at_zero() / cell.volume()).abs() < 1e-14 * v);
        let mu = mu_lambda(&pot, &cell, 0.3).unwrap();
        let expect = 0.3 + 0.5 * (pot.phi_at_zero() - pot.phi_hat_at_zero() / cell.volume());
        assert!((mu - expect).abs() < 1e-12 * expect.abs());
    }

    #[test]
    fn box_energy_special_cases() {
        let pot = fixtures::longrange_potential(K0).unwrap();
        let bcc = bcc_at_threshold();
        let cell = PeriodCell::new(bcc.basis().clone(), &[2, 2, 2]).unwrap();
        assert_eq!(box_energy(&pot, &cell, &[]).unwrap().energy, 0.0);
        let pts = cell.points_of(&bcc);
        let b = box_energy(&pot, &cell, &pts).unwrap();
        assert!(b.fluctuation.abs() < 1e-12 * b.floor.abs());
        let one = box_energy(&pot, &cell, &[Vector3::new(0.3, 0.1, 0.2)]).unwrap();
        let grid = DualGrid::new(&pot, &cell).unwrap();
        let floor = (pot.phi_hat_at_zero() - grid.phi_hat_sum()) / (2.0 * cell.volume());
        assert!((one.floor - floor).abs() < 1e-14 * floor.abs());
        assert!(one.energy.abs() < 1e-13 * floor.abs());
    }

    #[test]
    fn box_energy_is_the_periodized_pair_sum() {
        let pot = fixtures::longrange_potential(K0).unwrap();
        let sc = LatticeName::Sc.configuration(0.9).unwrap();
        let cell = PeriodCell::new(sc.basis().clone(), &[2, 3, 2]).unwrap();
        let grid = DualGrid::new(&pot, &cell).unwrap();
        let pts = [
            Vector3::new(0.1, 0.2, 0.3),
            Vector3::new(1.2, 0.4, 1.1),
            Vector3::new(0.7, 2.5, 0.2),
            Vector3::new(1.5, 1.9, 1.6),
        ];
        let mut pair = 0.0;
        for (i, a) in pts.iter().enumerate() {
            for (j, b) in pts.iter().enumerate() {
                if i != j {
                    pair += 0.5 * grid.periodized_phi(&(a - b));
                }
            }
        }
        let u = box_energy_on(&grid, &pts);
        assert!((u.energy - pair).abs() < 1e-12 * pair.abs().max(u.floor.abs()));
        assert!(u.fluctuation >= 0.0);
    }

    #[test]
    fn force_free_field_at_threshold() {
        let pot = fixtures::longrange_potential(K0).unwrap();
        let bcc = bcc_at_threshold();
        let field = ExternalField::new(&pot, &bcc).unwrap();
        for i in 0..50 {
            let t = i as f64;
            let r = Vector3::new((0.37 * t).sin(), (1.3 * t).cos() * 2.0, 0.11 * t);
            let s = field.eval(&r);
            assert!(s.deviation.abs() <= 1e-10 * s.expected);
        }
    }

    #[test]
    fn field_of_fcc_below_threshold_varies() {
        let pot = fixtures::longrange_potential(K0).unwrap();
        let rho3 = LatticeName::Bcc.closed_form_threshold(K0).unwrap();
        let fcc = LatticeName::Fcc.configuration(1.0).unwrap().scale_to_density(rho3).unwrap();
        let s = external_field(&pot, &fcc, &Vector3::new(0.21, 0.13, 0.05)).unwrap();
        assert!(s.deviation.abs() > 1e-6 * s.expected);
    }
}
