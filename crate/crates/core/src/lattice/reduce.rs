//! Reduction, shortest vectors and ball enumeration for lattices of
//! dimension at most three.
//!
//! Generators are the first `dim` rows of a 3x3 matrix; unused rows are
//! identity padding and never enter a lattice vector.

use nalgebra::{Matrix3, Vector3};

pub type Coeffs = [i64; 3];

/// A lattice vector together with its integer coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticePoint {
    pub vector: Vector3<f64>,
    pub coeffs: Coeffs,
    pub norm: f64,
}

#[inline]
fn row(m: &Matrix3<f64>, i: usize) -> Vector3<f64> {
    m.row(i).transpose()
}

/// Greedy reduction: returns `(reduced, t)` with `reduced = t * rows`,
/// `t` unimodular, and the reduced rows sorted by length.
pub fn reduce(dim: usize, rows: &Matrix3<f64>) -> (Matrix3<f64>, [[i64; 3]; 3]) {
    let mut b: Vec<Vector3<f64>> = (0..dim).map(|i| row(rows, i)).collect();
    let mut t: Vec<[i64; 3]> = (0..dim)
        .map(|i| {
            let mut e = [0i64; 3];
            e[i] = 1;
            e
        })
        .collect();

    let sort = |b: &mut Vec<Vector3<f64>>, t: &mut Vec<[i64; 3]>| {
        let mut idx: Vec<usize> = (0..b.len()).collect();
        idx.sort_by(|&i, &j| b[i].norm_squared().partial_cmp(&b[j].norm_squared()).unwrap());
        *b = idx.iter().map(|&i| b[i]).collect();
        *t = idx.iter().map(|&i| t[i]).collect();
    };

    for _ in 0..200 {
        sort(&mut b, &mut t);
        let mut changed = false;
        for i in 1..dim {
            // size-reduce b_i against shorter vectors until stable
            for _ in 0..50 {
                let mut moved = false;
                for j in 0..i {
                    let m = (b[i].dot(&b[j]) / b[j].norm_squared()).round();
                    if m != 0.0 {
                        let candidate = b[i] - m * b[j];
                        if candidate.norm_squared() < b[i].norm_squared() * (1.0 - 1e-14) {
                            b[i] = candidate;
                            let mi = m as i64;
                            for c in 0..3 {
                                t[i][c] -= mi * t[j][c];
                            }
                            moved = true;
                        }
                    }
                }
                if i == 2 {
                    // closest vector in the plane of b_0, b_1 among small combinations
                    let mut best = (b[2].norm_squared(), 0i64, 0i64);
                    for e0 in -1i64..=1 {
                        for e1 in -1i64..=1 {
                            let v = b[2] + e0 as f64 * b[0] + e1 as f64 * b[1];
                            if v.norm_squared() < best.0 * (1.0 - 1e-14) {
                                best = (v.norm_squared(), e0, e1);
                            }
                        }
                    }
                    if best.1 != 0 || best.2 != 0 {
                        let shift = best.1 as f64 * b[0] + best.2 as f64 * b[1];
                        b[2] += shift;
                        for c in 0..3 {
                            t[2][c] += best.1 * t[0][c] + best.2 * t[1][c];
                        }
                        moved = true;
                    }
                }
                if !moved {
                    break;
                }
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    sort(&mut b, &mut t);

    let mut reduced = Matrix3::identity();
    let mut tm = [[0i64; 3]; 3];
    for i in 0..3 {
        tm[i][i] = 1;
    }
    for i in 0..dim {
        reduced.set_row(i, &b[i].transpose());
        tm[i] = t[i];
    }
    (reduced, tm)
}

/// Norms of the dual vectors: `|n_alpha| <= |v| * dual_norms[alpha]` for
/// every lattice vector `v = sum n_alpha b_alpha`.
fn dual_norms(dim: usize, rows: &Matrix3<f64>) -> [f64; 3] {
    let inv = rows
        .try_inverse()
        .expect("lattice generators must be linearly independent");
    let mut out = [0.0; 3];
    for a in 0..dim {
        out[a] = (0..dim).map(|c| inv[(c, a)] * inv[(c, a)]).sum::<f64>().sqrt();
    }
    out
}

fn map_coeffs(n: &[i64; 3], t: &[[i64; 3]; 3], dim: usize) -> Coeffs {
    // v = sum_a n_a reduced_a = sum_a n_a sum_b t[a][b] orig_b
    let mut m = [0i64; 3];
    for a in 0..dim {
        for b in 0..dim {
            m[b] += n[a] * t[a][b];
        }
    }
    m
}

/// All lattice vectors with `|v| < radius` (strict), each exactly once,
/// including the origin, sorted by norm then coefficients. Coefficients
/// refer to the original generators.
pub fn enumerate_ball(dim: usize, rows: &Matrix3<f64>, radius: f64) -> Vec<LatticePoint> {
    let mut out = Vec::new();
    if !(radius > 0.0) {
        return out;
    }
    let (reduced, t) = reduce(dim, rows);
    let bounds = dual_norms(dim, &reduced);
    let nmax: Vec<i64> = (0..3)
        .map(|a| if a < dim { (radius * bounds[a]).floor() as i64 } else { 0 })
        .collect();
    let r2 = radius * radius;
    let b: Vec<Vector3<f64>> = (0..3).map(|i| row(&reduced, i)).collect();
    for n0 in -nmax[0]..=nmax[0] {
        let v0 = n0 as f64 * b[0];
        for n1 in -nmax[1]..=nmax[1] {
            let v1 = if dim > 1 { v0 + n1 as f64 * b[1] } else { v0 };
            for n2 in -nmax[2]..=nmax[2] {
                let v = if dim > 2 { v1 + n2 as f64 * b[2] } else { v1 };
                let n2v = v.norm_squared();
                if n2v < r2 {
                    let coeffs = map_coeffs(&[n0, n1, n2], &t, dim);
                    out.push(LatticePoint {
                        vector: original_vector(dim, rows, &coeffs),
                        coeffs,
                        norm: n2v.sqrt(),
                    });
                }
            }
        }
    }
    out.retain(|p| p.norm < radius);
    out.sort_by(|a, b| {
        a.norm
            .partial_cmp(&b.norm)
            .unwrap()
            .then_with(|| a.coeffs.cmp(&b.coeffs))
    });
    out
}

/// `sum_a coeffs[a] * row_a`, computed from the original generators so that
/// exact coefficient patterns give exact cancellations.
pub fn original_vector(dim: usize, rows: &Matrix3<f64>, coeffs: &Coeffs) -> Vector3<f64> {
    let mut v = Vector3::zeros();
    for a in 0..dim {
        v += coeffs[a] as f64 * row(rows, a);
    }
    v
}

/// Length and coefficients of a shortest nonzero lattice vector.
pub fn shortest_vector(dim: usize, rows: &Matrix3<f64>) -> (f64, Coeffs) {
    let (reduced, t) = reduce(dim, rows);
    let first = row(&reduced, 0).norm();
    // any shorter vector lies within the ball through the first reduced generator
    let candidates = enumerate_ball(dim, &reduced, first * (1.0 + 1e-9));
    let best = candidates
        .iter()
        .filter(|p| p.coeffs != [0, 0, 0])
        .min_by(|a, b| a.norm.partial_cmp(&b.norm).unwrap())
        .expect("reduced generator is itself a candidate");
    (best.norm, map_coeffs(&best.coeffs, &t, dim))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_shortest(dim: usize, rows: &Matrix3<f64>, n: i64) -> f64 {
        let mut best = f64::INFINITY;
        let r = |a: usize| if a < dim { n } else { 0 };
        for a in -r(0)..=r(0) {
            for b in -r(1)..=r(1) {
                for c in -r(2)..=r(2) {
                    if (a, b, c) == (0, 0, 0) {
                        continue;
                    }
                    best = best.min(original_vector(dim, rows, &[a, b, c]).norm());
                }
            }
        }
        best
    }

    #[test]
    fn skewed_two_dimensional_basis() {
        let rows = Matrix3::new(1.0, 0.0, 0.0, 0.99, 0.01, 0.0, 0.0, 0.0, 1.0);
        let (norm, coeffs) = shortest_vector(2, &rows);
        let oracle = brute_force_shortest(2, &rows, 50);
        assert!((norm - oracle).abs() < 1e-12);
        // the minimum is not one of the generators
        assert!(norm < 0.99);
        let v = original_vector(2, &rows, &coeffs);
        assert!((v.norm() - norm).abs() < 1e-12);
    }

    #[test]
    fn triangular_lattice_degenerate_minimum() {
        let s = 3f64.sqrt() / 2.0;
        let rows = Matrix3::new(1.0, 0.0, 0.0, 0.5, s, 0.0, 0.0, 0.0, 1.0);
        let (norm, _) = shortest_vector(2, &rows);
        assert!((norm - 1.0).abs() < 1e-14);
        let shell: Vec<_> = enumerate_ball(2, &rows, 1.0 + 1e-9)
            .into_iter()
            .filter(|p| p.norm > 0.5)
            .collect();
        assert_eq!(shell.len(), 6);
    }

    #[test]
    fn ball_strictness_and_origin() {
        let rows = Matrix3::identity();
        let pts = enumerate_ball(3, &rows, 1.0);
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].coeffs, [0, 0, 0]);
        assert_eq!(enumerate_ball(3, &rows, 1.0 + 1e-9).len(), 7);
    }

    #[test]
    fn one_dimensional_enumeration() {
        let rows = Matrix3::new(2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        let pts = enumerate_ball(1, &rows, 5.0);
        let coeffs: Vec<i64> = pts.iter().map(|p| p.coeffs[0]).collect();
        assert_eq!(coeffs, vec![0, -1, 1, -2, 2]);
        assert_eq!(shortest_vector(1, &rows).0, 2.0);
    }
}
