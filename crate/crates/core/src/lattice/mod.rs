//! Bravais lattices, reciprocal lattices, periodic configurations and period
//! cells in dimension one to three.
//!
//! Vectors are stored as [`Vector3`] with trailing components zero when
//! `d < 3`.

mod named;
mod reduce;
mod search;

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use named::{threshold_density, threshold_table, LatticeName, ThresholdRow, HCP_IDEAL_C_OVER_A, SH_OPTIMAL_C_OVER_A};
pub use reduce::{enumerate_ball, original_vector, reduce, shortest_vector, Coeffs, LatticePoint};
pub use search::{minimal_bravais_check, MinimalBravais};

/// Relative tolerance used when deciding whether a fractional coordinate is an integer.
const FRACTIONAL_TOLERANCE: f64 = 1e-9;

fn check_dim(d: usize) -> Result<()> {
    if (1..=3).contains(&d) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("dimension must be 1, 2 or 3, got {d}")))
    }
}

fn to_vec3(d: usize, v: &[f64]) -> Result<Vector3<f64>> {
    if v.len() != d {
        return Err(Error::InvalidParameter(format!(
            "expected a {d}-vector, got {} components",
            v.len()
        )));
    }
    let mut out = Vector3::zeros();
    for (i, x) in v.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::InvalidParameter("non-finite vector component".into()));
        }
        out[i] = *x;
    }
    Ok(out)
}

/// The first `d` components.
pub fn truncate(d: usize, v: &Vector3<f64>) -> Vec<f64> {
    v.iter().take(d).copied().collect()
}

/// Matrix whose first `d` rows are `rows` and whose remaining rows are unit vectors.
fn padded(d: usize, rows: &[Vector3<f64>]) -> Matrix3<f64> {
    let mut m = Matrix3::identity();
    for (i, r) in rows.iter().enumerate().take(d) {
        m.set_row(i, &r.transpose());
    }
    m
}

fn dual_rows(d: usize, rows: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let det = rows.determinant();
    let scale = (0..d).map(|i| rows.row(i).norm()).product::<f64>();
    if !(det.abs() > 1e-13 * scale) {
        return Err(Error::DegenerateBasis(format!("generators are linearly dependent (det = {det})")));
    }
    let inv = rows.try_inverse().ok_or_else(|| Error::DegenerateBasis("singular generator matrix".into()))?;
    let mut b = 2.0 * PI * inv.transpose();
    for i in d..3 {
        b.set_row(i, &Vector3::<f64>::ith(i, 1.0).transpose());
    }
    Ok(b)
}

/// Generators `a_1..a_d` of a Bravais lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeBasis {
    dimension: usize,
    rows: Matrix3<f64>,
}

impl LatticeBasis {
    pub fn new(generators: &[Vec<f64>]) -> Result<LatticeBasis> {
        let d = generators.len();
        check_dim(d)?;
        let rows: Vec<Vector3<f64>> = generators.iter().map(|g| to_vec3(d, g)).collect::<Result<_>>()?;
        LatticeBasis::from_rows(d, padded(d, &rows))
    }

    /// From a matrix whose first `d` rows are the generators.
    pub fn from_rows(dimension: usize, rows: Matrix3<f64>) -> Result<LatticeBasis> {
        check_dim(dimension)?;
        let mut m = Matrix3::identity();
        for i in 0..dimension {
            let mut r = rows.row(i).transpose();
            for c in dimension..3 {
                if r[c] != 0.0 {
                    return Err(Error::InvalidParameter("generator has components beyond the dimension".into()));
                }
                r[c] = 0.0;
            }
            m.set_row(i, &r.transpose());
        }
        dual_rows(dimension, &m)?;
        Ok(LatticeBasis { dimension, rows: m })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn rows(&self) -> &Matrix3<f64> {
        &self.rows
    }

    pub fn generator(&self, i: usize) -> Vector3<f64> {
        assert!(i < self.dimension);
        self.rows.row(i).transpose()
    }

    pub fn generators(&self) -> Vec<Vec<f64>> {
        (0..self.dimension).map(|i| truncate(self.dimension, &self.generator(i))).collect()
    }

    /// `|det(a_1..a_d)|`.
    pub fn cell_volume(&self) -> f64 {
        self.rows.determinant().abs()
    }

    pub fn density(&self) -> f64 {
        1.0 / self.cell_volume()
    }

    pub fn gram(&self) -> Matrix3<f64> {
        gram(self.dimension, &self.rows)
    }

    pub fn reciprocal(&self) -> Result<ReciprocalBasis> {
        ReciprocalBasis::from_rows(self.dimension, dual_rows(self.dimension, &self.rows)?)
    }

    /// Generators multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<LatticeBasis> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidParameter(format!("scale must be positive, got {s}")));
        }
        let mut rows = self.rows;
        for i in 0..self.dimension {
            let r = rows.row(i) * s;
            rows.set_row(i, &r);
        }
        LatticeBasis::from_rows(self.dimension, rows)
    }

    /// Generators `M a_alpha`, with `M` acting on the first `d` coordinates.
    pub fn transformed(&self, m: &Matrix3<f64>) -> Result<LatticeBasis> {
        let mut rows = Matrix3::identity();
        for i in 0..self.dimension {
            let v = apply(self.dimension, m, &self.generator(i));
            rows.set_row(i, &v.transpose());
        }
        LatticeBasis::from_rows(self.dimension, rows)
    }

    /// Fractional coordinates `x` with `v = sum x_alpha a_alpha`.
    pub fn to_fractional(&self, v: &Vector3<f64>) -> Vector3<f64> {
        let inv_t = self.rows.transpose().try_inverse().expect("validated basis");
        let mut f = inv_t * v;
        for c in self.dimension..3 {
            f[c] = 0.0;
        }
        f
    }

    pub fn to_cartesian(&self, f: &Vector3<f64>) -> Vector3<f64> {
        let mut v = Vector3::zeros();
        for i in 0..self.dimension {
            v += f[i] * self.generator(i);
        }
        v
    }

    pub fn shortest_vector(&self) -> (f64, Coeffs) {
        shortest_vector(self.dimension, &self.rows)
    }
}

/// `M v` restricted to the leading `d x d` block.
pub fn apply(d: usize, m: &Matrix3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
    let mut out = Vector3::zeros();
    for i in 0..d {
        for j in 0..d {
            out[i] += m[(i, j)] * v[j];
        }
    }
    out
}

fn gram(d: usize, rows: &Matrix3<f64>) -> Matrix3<f64> {
    let mut g = Matrix3::zeros();
    for i in 0..d {
        for j in 0..d {
            g[(i, j)] = rows.row(i).dot(&rows.row(j));
        }
    }
    g
}

/// Generators `b_1..b_d` with `a_alpha . b_beta = 2 pi delta_{alpha beta}`
/// and the cached length `q` of the shortest nonzero reciprocal vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ReciprocalBasis {
    dimension: usize,
    rows: Matrix3<f64>,
    shortest_norm: f64,
    shortest_coeffs: Coeffs,
}

/// One reciprocal shell: all vectors of (numerically) equal length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shell {
    pub norm: f64,
    pub multiplicity: usize,
    pub coeffs: Vec<Coeffs>,
}

impl ReciprocalBasis {
    fn from_rows(dimension: usize, rows: Matrix3<f64>) -> Result<ReciprocalBasis> {
        let (shortest_norm, shortest_coeffs) = shortest_vector(dimension, &rows);
        Ok(ReciprocalBasis {
            dimension,
            rows,
            shortest_norm,
            shortest_coeffs,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn rows(&self) -> &Matrix3<f64> {
        &self.rows
    }

    pub fn generator(&self, i: usize) -> Vector3<f64> {
        assert!(i < self.dimension);
        self.rows.row(i).transpose()
    }

    pub fn generators(&self) -> Vec<Vec<f64>> {
        (0..self.dimension).map(|i| truncate(self.dimension, &self.generator(i))).collect()
    }

    /// `q_{B*}`.
    pub fn shortest_norm(&self) -> f64 {
        self.shortest_norm
    }

    pub fn shortest_coeffs(&self) -> Coeffs {
        self.shortest_coeffs
    }

    pub fn gram(&self) -> Matrix3<f64> {
        gram(self.dimension, &self.rows)
    }

    /// The direct lattice whose reciprocal this is.
    pub fn dual(&self) -> Result<LatticeBasis> {
        LatticeBasis::from_rows(self.dimension, dual_rows(self.dimension, &self.rows)?)
    }

    /// All reciprocal vectors with `|k| < radius`, the origin included.
    pub fn enumerate_in_ball(&self, radius: f64) -> Vec<LatticePoint> {
        enumerate_ball(self.dimension, &self.rows, radius)
    }

    /// Nonzero vectors with `|k| < radius` grouped into shells of equal
    /// length up to `rel_tol`.
    pub fn shells(&self, radius: f64, rel_tol: f64) -> Vec<Shell> {
        group_shells(self.enumerate_in_ball(radius), rel_tol)
    }
}

pub(crate) fn group_shells(points: Vec<LatticePoint>, rel_tol: f64) -> Vec<Shell> {
    let mut shells: Vec<Shell> = Vec::new();
    for p in points.into_iter().filter(|p| p.coeffs != [0, 0, 0]) {
        match shells.last_mut() {
            Some(s) if (p.norm - s.norm).abs() <= rel_tol * s.norm => {
                s.multiplicity += 1;
                s.coeffs.push(p.coeffs);
            }
            _ => shells.push(Shell {
                norm: p.norm,
                multiplicity: 1,
                coeffs: vec![p.coeffs],
            }),
        }
    }
    shells
}

/// `X = union_j (B + y_j)`, with `y_1 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicConfiguration {
    basis: LatticeBasis,
    offsets: Vec<Vector3<f64>>,
    name: Option<String>,
}

/// JSON form of a periodic configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub dimension: usize,
    pub generators: Vec<Vec<f64>>,
    #[serde(default)]
    pub offsets: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl PeriodicConfiguration {
    /// Offsets are Cartesian; all are shifted so that the first is the
    /// origin. An empty offset list means a single point per cell.
    pub fn new(basis: LatticeBasis, offsets: Vec<Vector3<f64>>) -> Result<PeriodicConfiguration> {
        let d = basis.dimension();
        let mut offsets = if offsets.is_empty() { vec![Vector3::zeros()] } else { offsets };
        for y in &offsets {
            if y.iter().skip(d).any(|c| *c != 0.0) || y.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidParameter("offset has invalid components".into()));
            }
        }
        let y0 = offsets[0];
        for y in offsets.iter_mut() {
            *y -= y0;
        }
        let fracs: Vec<Vector3<f64>> = offsets.iter().map(|y| basis.to_fractional(y)).collect();
        for i in 0..fracs.len() {
            for j in 0..i {
                if is_integral(d, &(fracs[i] - fracs[j])) {
                    return Err(Error::InvalidParameter(format!(
                        "offsets {j} and {i} coincide modulo the lattice"
                    )));
                }
            }
        }
        Ok(PeriodicConfiguration {
            basis,
            offsets,
            name: None,
        })
    }

    pub fn bravais(basis: LatticeBasis) -> PeriodicConfiguration {
        PeriodicConfiguration {
            basis,
            offsets: vec![Vector3::zeros()],
            name: None,
        }
    }

    /// Offsets given in generator coordinates.
    pub fn from_fractional(basis: LatticeBasis, fractional: &[Vector3<f64>]) -> Result<PeriodicConfiguration> {
        let offsets = fractional.iter().map(|f| basis.to_cartesian(f)).collect();
        PeriodicConfiguration::new(basis, offsets)
    }

    pub fn from_spec(spec: &LatticeSpec) -> Result<PeriodicConfiguration> {
        if spec.generators.len() != spec.dimension {
            return Err(Error::InvalidParameter(format!(
                "{} generators given for dimension {}",
                spec.generators.len(),
                spec.dimension
            )));
        }
        let basis = LatticeBasis::new(&spec.generators)?;
        let offsets = spec
            .offsets
            .iter()
            .map(|o| to_vec3(spec.dimension, o))
            .collect::<Result<Vec<_>>>()?;
        Ok(PeriodicConfiguration::new(basis, offsets)?.with_name(spec.name.clone()))
    }

    pub fn to_spec(&self) -> LatticeSpec {
        let d = self.dimension();
        LatticeSpec {
            dimension: d,
            generators: self.basis.generators(),
            offsets: self.offsets.iter().map(|y| truncate(d, y)).collect(),
            name: self.name.clone(),
        }
    }

    pub fn with_name(mut self, name: Option<String>) -> PeriodicConfiguration {
        self.name = name;
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn basis(&self) -> &LatticeBasis {
        &self.basis
    }

    pub fn dimension(&self) -> usize {
        self.basis.dimension()
    }

    pub fn offsets(&self) -> &[Vector3<f64>] {
        &self.offsets
    }

    /// `J`.
    pub fn points_per_cell(&self) -> usize {
        self.offsets.len()
    }

    /// `rho(X) = J rho(B)`.
    pub fn density(&self) -> f64 {
        self.offsets.len() as f64 * self.basis.density()
    }

    pub fn reciprocal(&self) -> Result<ReciprocalBasis> {
        self.basis.reciprocal()
    }

    /// Uniform dilation to the requested density.
    pub fn scale_to_density(&self, rho_target: f64) -> Result<PeriodicConfiguration> {
        if !(rho_target.is_finite() && rho_target > 0.0) {
            return Err(Error::InvalidParameter(format!("density must be positive, got {rho_target}")));
        }
        let d = self.dimension() as f64;
        let s = (self.density() / rho_target).powf(1.0 / d);
        self.scaled(s)
    }

    /// Generators and offsets multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<PeriodicConfiguration> {
        Ok(PeriodicConfiguration {
            basis: self.basis.scaled(s)?,
            offsets: self.offsets.iter().map(|y| y * s).collect(),
            name: self.name.clone(),
        })
    }

    /// Generators and offsets mapped by `M`.
    pub fn transformed(&self, m: &Matrix3<f64>) -> Result<PeriodicConfiguration> {
        let d = self.dimension();
        Ok(PeriodicConfiguration {
            basis: self.basis.transformed(m)?,
            offsets: self.offsets.iter().map(|y| apply(d, m, y)).collect(),
            name: self.name.clone(),
        })
    }

    /// Offsets in generator coordinates, reduced into `[0, 1)`.
    pub fn fractional_offsets(&self) -> Vec<Vector3<f64>> {
        let d = self.dimension();
        self.offsets
            .iter()
            .map(|y| wrap_unit(d, &self.basis.to_fractional(y)))
            .collect()
    }

    /// False when some translation by a fraction of the generators with
    /// denominator at most 4 maps the offset set onto itself, which means a
    /// smaller `J` with a finer lattice describes the same configuration.
    pub fn is_minimal(&self) -> bool {
        let d = self.dimension();
        let f = self.fractional_offsets();
        for j in 1..f.len() {
            let t = f[j] - f[0];
            let rational = (2..=4).any(|m| is_integral(d, &(t * m as f64)));
            if !rational {
                continue;
            }
            let invariant = f.iter().all(|fi| f.iter().any(|fk| is_integral(d, &(fi + t - fk))));
            if invariant {
                return false;
            }
        }
        true
    }
}

fn is_integral(d: usize, v: &Vector3<f64>) -> bool {
    (0..d).all(|i| (v[i] - v[i].round()).abs() < FRACTIONAL_TOLERANCE)
}

/// Reduce fractional coordinates into `[0, 1)`.
pub fn wrap_unit(d: usize, f: &Vector3<f64>) -> Vector3<f64> {
    let mut out = *f;
    for i in 0..d {
        let mut x = f[i] - f[i].floor();
        if x >= 1.0 {
            x -= 1.0;
        }
        out[i] = x;
    }
    out
}

/// `Lambda = { sum x_alpha a_alpha : 0 <= x_alpha < L_alpha }` with dual grid
/// generated by `b_alpha / L_alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodCell {
    basis: LatticeBasis,
    multipliers: [usize; 3],
}

impl PeriodCell {
    pub fn new(basis: LatticeBasis, multipliers: &[usize]) -> Result<PeriodCell> {
        let d = basis.dimension();
        if multipliers.len() != d || multipliers.iter().any(|&l| l == 0) {
            return Err(Error::InvalidParameter(format!(
                "need {d} positive multipliers, got {multipliers:?}"
            )));
        }
        let mut m = [1usize; 3];
        m[..d].copy_from_slice(multipliers);
        Ok(PeriodCell { basis, multipliers: m })
    }

    pub fn basis(&self) -> &LatticeBasis {
        &self.basis
    }

    pub fn dimension(&self) -> usize {
        self.basis.dimension()
    }

    pub fn multipliers(&self) -> Vec<usize> {
        self.multipliers[..self.dimension()].to_vec()
    }

    /// `N_{B cap Lambda} = prod L_alpha`.
    pub fn lattice_point_count(&self) -> usize {
        self.multipliers.iter().product()
    }

    /// `V(Lambda)`.
    pub fn volume(&self) -> f64 {
        self.basis.cell_volume() * self.lattice_point_count() as f64
    }

    /// Edge vectors `L_alpha a_alpha` of the cell.
    pub fn edges(&self) -> LatticeBasis {
        let mut rows = Matrix3::identity();
        for i in 0..self.dimension() {
            let v = self.basis.generator(i) * self.multipliers[i] as f64;
            rows.set_row(i, &v.transpose());
        }
        LatticeBasis::from_rows(self.dimension(), rows).expect("scaled generators stay independent")
    }

    /// Generators `b_alpha / L_alpha` of `Lambda*`.
    pub fn dual_grid_rows(&self) -> Matrix3<f64> {
        let b = dual_rows(self.dimension(), self.basis.rows()).expect("validated basis");
        let mut rows = b;
        for i in 0..self.dimension() {
            let r = b.row(i) / self.multipliers[i] as f64;
            rows.set_row(i, &r);
        }
        rows
    }

    /// `Lambda* cap { |k| < radius }`; coefficients are the integers `n_alpha`
    /// in `k = sum (n_alpha / L_alpha) b_alpha`.
    pub fn dual_in_ball(&self, radius: f64) -> Vec<LatticePoint> {
        enumerate_ball(self.dimension(), &self.dual_grid_rows(), radius)
    }

    /// Cell coordinates `x_alpha / L_alpha in [0, 1)` of a Cartesian point.
    pub fn to_cell_fractional(&self, r: &Vector3<f64>) -> Vector3<f64> {
        let mut f = self.basis.to_fractional(r);
        for i in 0..self.dimension() {
            f[i] /= self.multipliers[i] as f64;
        }
        wrap_unit(self.dimension(), &f)
    }

    pub fn from_cell_fractional(&self, f: &Vector3<f64>) -> Vector3<f64> {
        let mut g = *f;
        for i in 0..self.dimension() {
            g[i] *= self.multipliers[i] as f64;
        }
        self.basis.to_cartesian(&g)
    }

    /// `X cap Lambda` in Cartesian coordinates, ordered by lattice index then offset.
    pub fn points_of(&self, config: &PeriodicConfiguration) -> Vec<Vector3<f64>> {
        let d = self.dimension();
        let fr = config.fractional_offsets();
        let mut out = Vec::with_capacity(self.lattice_point_count() * fr.len());
        let l = self.multipliers;
        for n0 in 0..l[0] {
            for n1 in 0..l[1] {
                for n2 in 0..l[2] {
                    let n = Vector3::new(n0 as f64, n1 as f64, n2 as f64);
                    for y in &fr {
                        let mut f = n + y;
                        for c in d..3 {
                            f[c] = 0.0;
                        }
                        out.push(self.basis.to_cartesian(&f));
                    }
                }
            }
        }
        out
    }
}
