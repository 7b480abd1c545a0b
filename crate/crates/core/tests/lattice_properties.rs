use std::f64::consts::PI;

use gsc_core::lattice::{
    enumerate_ball, minimal_bravais_check, original_vector, threshold_table, LatticeBasis, LatticeName,
    SH_OPTIMAL_C_OVER_A,
};
use nalgebra::Matrix3;
use proptest::prelude::*;

const K0: f64 = 2.0 * PI;

fn basis_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..=3).prop_flat_map(|d| {
        prop::collection::vec(prop::collection::vec(-1.0f64..1.0, d), d).prop_map(move |mut g| {
            for (i, row) in g.iter_mut().enumerate() {
                row[i] += 1.5;
            }
            g
        })
    })
}

fn brute_force(d: usize, rows: &Matrix3<f64>, radius: f64, n: i64) -> Vec<[i64; 3]> {
    let r = |a: usize| if a < d { n } else { 0 };
    let mut out = Vec::new();
    for a in -r(0)..=r(0) {
        for b in -r(1)..=r(1) {
            for c in -r(2)..=r(2) {
                if original_vector(d, rows, &[a, b, c]).norm() < radius {
                    out.push([a, b, c]);
                }
            }
        }
    }
    out.sort();
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn enumeration_matches_brute_force(g in basis_strategy(), frac in 0.1f64..4.0) {
        let basis = LatticeBasis::new(&g).unwrap();
        let recip = basis.reciprocal().unwrap();
        let radius = frac * recip.shortest_norm();
        let mut got: Vec<[i64; 3]> = recip.enumerate_in_ball(radius).iter().map(|p| p.coeffs).collect();
        got.sort();
        let expect = brute_force(basis.dimension(), recip.rows(), radius, 12);
        prop_assert_eq!(got, expect);
    }

    #[test]
    fn reciprocal_is_an_involution(g in basis_strategy()) {
        let basis = LatticeBasis::new(&g).unwrap();
        let back = basis.reciprocal().unwrap().dual().unwrap();
        let d = basis.dimension();
        let (ga, gb) = (basis.gram(), back.gram());
        let scale = ga.norm();
        prop_assert!((ga - gb).norm() <= 1e-12 * scale);
        let a = basis.rows();
        let b = basis.reciprocal().unwrap();
        for i in 0..d {
            for j in 0..d {
                let dot = a.row(i).transpose().dot(&b.generator(j));
                let expect = if i == j { 2.0 * PI } else { 0.0 };
                prop_assert!((dot - expect).abs() <= 1e-12 * 2.0 * PI * (1.0 + a.norm() * b.rows().norm()));
            }
        }
    }

    #[test]
    fn scaling_covariance(g in basis_strategy(), s in 0.2f64..5.0) {
        let basis = LatticeBasis::new(&g).unwrap();
        let scaled = basis.scaled(s).unwrap();
        let d = basis.dimension() as i32;
        prop_assert!((scaled.density() - basis.density() / s.powi(d)).abs() <= 1e-12 * scaled.density());
        let q = basis.reciprocal().unwrap().shortest_norm();
        let qs = scaled.reciprocal().unwrap().shortest_norm();
        prop_assert!((qs - q / s).abs() <= 1e-12 * qs);
    }
}

#[test]
fn shortest_vector_of_random_bases_matches_brute_force() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let mut m: Matrix3<f64> = Matrix3::identity();
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] = rng.random_range(-2.0..2.0);
            }
        }
        if m.determinant().abs() < 0.05 {
            continue;
        }
        let (q, _) = gsc_core::lattice::shortest_vector(3, &m);
        let all = enumerate_ball(3, &m, q * 1.5);
        let mut best = f64::INFINITY;
        for a in -15i64..=15 {
            for b in -15i64..=15 {
                for c in -15i64..=15 {
                    if (a, b, c) != (0, 0, 0) {
                        best = best.min(original_vector(3, &m, &[a, b, c]).norm());
                    }
                }
            }
        }
        assert!((q - best).abs() <= 1e-12 * best, "{q} vs {best}");
        assert!(all.len() >= 3);
    }
}

#[test]
fn sc_ball_has_seven_vectors() {
    let sc = LatticeName::Sc.configuration(1.0).unwrap();
    let pts = sc.reciprocal().unwrap().enumerate_in_ball(K0 + 0.01);
    assert_eq!(pts.len(), 7);
    assert!(sc.reciprocal().unwrap().enumerate_in_ball(0.5 * K0).len() == 1);
}

#[test]
fn threshold_ordering_and_table() {
    let rows = threshold_table(K0).unwrap();
    let get = |n: &str| rows.iter().find(|r| r.name == n).unwrap().computed;
    assert!(get("bcc") < get("fcc") && get("fcc") < get("sc"));
    for r in &rows {
        if let Some(rel) = r.relative_difference {
            assert!(rel < 1e-12, "{}: {rel}", r.name);
        }
    }
}

#[test]
fn sh_threshold_is_minimized_at_the_optimal_ratio() {
    let at = |c: f64| LatticeName::Sh { c_over_a: c }.computed_threshold(K0).unwrap();
    let best = at(SH_OPTIMAL_C_OVER_A);
    for i in 0..=60 {
        let c = 0.5 + 0.02 * i as f64;
        assert!(at(c) >= best * (1.0 - 1e-12), "c/a = {c}");
    }
}

#[test]
fn bcc_is_the_least_dense_admissible_lattice_in_three_dimensions() {
    let r = minimal_bravais_check(3, K0, 11).unwrap();
    assert_eq!(r.lattice, "bcc");
    assert!(r.relative_error < 1e-6, "{r:?}");
}
