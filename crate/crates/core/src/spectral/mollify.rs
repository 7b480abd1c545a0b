//! Radial convolution of a base profile with the smooth bump
//! `eta_eps(k) = exp(-1 / (1 - k^2/eps^2))`.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::{ProfileKind, SpectralProfile};
use crate::error::{Error, Result};
use crate::numerics::{gauss_legendre, NeumaierSum, UniformPchip};

/// Number of samples of a mollified profile on `[0, K0]`.
pub const MOLLIFIED_GRID_POINTS: usize = 4096;

const H_TABLE_POINTS: usize = 2049;
const S_PANELS: usize = 8;

/// The unnormalised bump `exp(-1/(1 - k^2/eps^2))`, zero for `|k| >= eps`.
#[inline]
pub fn mollifier(k: f64, eps: f64) -> f64 {
    let x = k / eps;
    let x2 = x * x;
    if x2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x2)).exp()
    }
}

/// `H(u) = int_0^min(u, eps) eta(t) t dt`, tabulated as a cubic Hermite
/// spline with exact derivatives `eta(u) u`.
struct RadialMoment {
    eps: f64,
    step: f64,
    values: Vec<f64>,
}

impl RadialMoment {
    fn new(eps: f64) -> RadialMoment {
        let step = eps / (H_TABLE_POINTS - 1) as f64;
        let rule = gauss_legendre(16);
        let mut values = Vec::with_capacity(H_TABLE_POINTS);
        let mut acc = NeumaierSum::new();
        values.push(0.0);
        for i in 1..H_TABLE_POINTS {
            let a = (i - 1) as f64 * step;
            acc.add(rule.integrate(a, a + step, |t| mollifier(t, eps) * t));
            values.push(acc.sum());
        }
        RadialMoment { eps, step, values }
    }

    #[inline]
    fn eval(&self, u: f64) -> f64 {
        let u = u.abs();
        if u >= self.eps {
            return *self.values.last().unwrap();
        }
        let s = u / self.step;
        let i = (s.floor() as usize).min(H_TABLE_POINTS - 2);
        let t = s - i as f64;
        let (x0, x1) = (i as f64 * self.step, (i + 1) as f64 * self.step);
        let m0 = mollifier(x0, self.eps) * x0 * self.step;
        let m1 = mollifier(x1, self.eps) * x1 * self.step;
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.values[i]
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * self.values[i + 1]
            + (t3 - t2) * m1
    }
}

/// Split `[lo, hi]` at every base breakpoint strictly inside it.
fn segments(lo: f64, hi: f64, breaks: &[f64]) -> Vec<(f64, f64)> {
    let mut pts = vec![lo];
    pts.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
    pts.push(hi);
    pts.windows(2).map(|w| (w[0], w[1])).collect()
}

fn integrate_segments<F: Fn(f64) -> f64>(segs: &[(f64, f64)], f: F) -> f64 {
    let rule = gauss_legendre(16);
    let mut acc = NeumaierSum::new();
    for &(a, b) in segs {
        if b > a {
            acc.add(rule.integrate_panels(a, b, S_PANELS, &f));
        }
    }
    acc.sum()
}

/// Base breakpoints worth splitting at (coarse tables are smooth enough as is).
fn base_breaks(base: &SpectralProfile) -> Vec<f64> {
    match base.kind() {
        ProfileKind::Piecewise { knots, .. } => knots.clone(),
        _ => vec![0.0, base.cutoff()],
    }
}

fn convolve_1d(base: &SpectralProfile, eps: f64, k: f64) -> f64 {
    let reach = base.cutoff();
    let lo = (k - eps).max(-reach);
    let hi = (k + eps).min(reach);
    if hi <= lo {
        return 0.0;
    }
    let mut breaks: Vec<f64> = base_breaks(base);
    breaks.extend(base_breaks(base).iter().map(|b| -b));
    let segs = segments(lo, hi, &breaks);
    integrate_segments(&segs, |s| base.eval_phi_hat(s.abs()) * mollifier(k - s, eps))
}

fn convolve_2d(base: &SpectralProfile, eps: f64, k: f64) -> f64 {
    let reach = base.cutoff();
    let lo = (k - eps).max(0.0);
    let hi = (k + eps).min(reach);
    if hi <= lo {
        return 0.0;
    }
    let theta_rule = gauss_legendre(32);
    let angular = |s: f64| -> f64 {
        if k == 0.0 || s == 0.0 {
            return 2.0 * PI * mollifier(k.max(s), eps);
        }
        let c = ((k * k + s * s - eps * eps) / (2.0 * k * s)).clamp(-1.0, 1.0);
        let theta_max = c.acos();
        2.0 * theta_rule.integrate_panels(0.0, theta_max, 2, |th| {
            let t2 = (k * k + s * s - 2.0 * k * s * th.cos()).max(0.0);
            mollifier(t2.sqrt(), eps)
        })
    };
    let segs = segments(lo, hi, &base_breaks(base));
    integrate_segments(&segs, |s| base.eval_phi_hat(s) * s * angular(s))
}

fn convolve_3d(base: &SpectralProfile, eps: f64, moment: &RadialMoment, k: f64) -> f64 {
    let reach = base.cutoff();
    let lo = (k - eps).max(0.0);
    let hi = (k + eps).min(reach);
    if hi <= lo {
        return 0.0;
    }
    let segs = segments(lo, hi, &base_breaks(base));
    if k == 0.0 {
        // limit of (2 pi / k) [H(k+s) - H(|k-s|)] is 4 pi eta(s) s
        return 4.0 * PI
            * integrate_segments(&segs, |s| base.eval_phi_hat(s) * s * s * mollifier(s, eps));
    }
    2.0 * PI / k
        * integrate_segments(&segs, |s| {
            base.eval_phi_hat(s) * s * (moment.eval(k + s) - moment.eval(k - s))
        })
}

pub(super) fn build(base: &SpectralProfile, eps: f64, cutoff: f64) -> Result<SpectralProfile> {
    if !(cutoff > 0.0) || !cutoff.is_finite() {
        return Err(Error::InvalidParameter(format!("cutoff must be positive, got {cutoff}")));
    }
    if !(eps > 0.0) || eps >= cutoff {
        return Err(Error::InvalidParameter(format!(
            "mollifier width must satisfy 0 < eps < K0, got eps = {eps}, K0 = {cutoff}"
        )));
    }
    let reach = cutoff - eps;
    if base.cutoff() > reach * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "base profile support {} exceeds K0 - eps = {reach}",
            base.cutoff()
        )));
    }
    // negative base samples make the result meaningless
    base.check_nonnegative()?;
    let d = base.dimension();
    let n = MOLLIFIED_GRID_POINTS;
    let step = cutoff / (n - 1) as f64;
    let moment = (d == 3).then(|| RadialMoment::new(eps));
    let mut values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let k = i as f64 * step;
            let v = match d {
                1 => convolve_1d(base, eps, k),
                2 => convolve_2d(base, eps, k),
                _ => convolve_3d(base, eps, moment.as_ref().unwrap(), k),
            };
            v.max(0.0)
        })
        .collect();
    values[n - 1] = 0.0;
    let table = UniformPchip::new(step, values, true);
    SpectralProfile::finish(
        d,
        cutoff,
        ProfileKind::Mollified {
            epsilon: eps,
            base: Box::new(base.clone()),
            table,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const K0: f64 = 2.0 * PI;

    /// Brute-force d-dimensional integral of eta over the ball of radius `reach`
    /// on a Cartesian grid (midpoint rule), used as an independent oracle.
    fn cartesian_eta_integral(d: usize, eps: f64, reach: f64, n: usize) -> f64 {
        let h = 2.0 * eps / n as f64;
        let coord = |i: usize| -eps + (i as f64 + 0.5) * h;
        let mut acc = NeumaierSum::new();
        match d {
            1 => {
                for i in 0..n {
                    let x = coord(i);
                    if x.abs() < reach {
                        acc.add(mollifier(x.abs(), eps) * h);
                    }
                }
            }
            2 => {
                for i in 0..n {
                    for j in 0..n {
                        let r = coord(i).hypot(coord(j));
                        if r < reach {
                            acc.add(mollifier(r, eps) * h * h);
                        }
                    }
                }
            }
            _ => {
                for i in 0..n {
                    for j in 0..n {
                        for l in 0..n {
                            let (x, y, z) = (coord(i), coord(j), coord(l));
                            let r = (x * x + y * y + z * z).sqrt();
                            if r < reach {
                                acc.add(mollifier(r, eps) * h * h * h);
                            }
                        }
                    }
                }
            }
        }
        acc.sum()
    }

    #[test]
    fn zero_base_gives_zero_profile() {
        for d in 1..=3 {
            let g = SpectralProfile::polynomial(d, 0.5 * K0, vec![0.0]).unwrap();
            let p = SpectralProfile::build_mollified(&g, 0.5 * K0, K0).unwrap();
            assert_eq!(p.phi_hat_at_zero(), 0.0);
            assert_eq!(p.eval_phi_hat(0.3 * K0), 0.0);
        }
    }

    #[test]
    fn unit_base_value_at_origin_matches_cartesian_quadrature() {
        // g = 1 on a ball larger than eps: phi_hat(0) = int eta over the eps-ball
        let eps = 0.3 * K0;
        for (d, n) in [(1usize, 200_000usize), (2, 2000), (3, 240)] {
            let g = SpectralProfile::polynomial(d, K0 - eps, vec![1.0]).unwrap();
            let p = SpectralProfile::build_mollified(&g, eps, K0).unwrap();
            let oracle = cartesian_eta_integral(d, eps, K0 - eps, n);
            let rel = (p.phi_hat_at_zero() - oracle).abs() / oracle;
            // midpoint rule on a smooth compactly supported integrand converges fast
            assert!(rel < 1e-6, "d={d}: {} vs {oracle} (rel {rel:e})", p.phi_hat_at_zero());
            assert!(p.phi_hat_at_zero() > 0.0);
            assert_eq!(p.eval_phi_hat(K0), 0.0);
            assert_eq!(p.eval_phi_hat(1.5 * K0), 0.0);
        }
    }

    #[test]
    fn support_edge_in_one_dimension() {
        let g = SpectralProfile::polynomial(1, 0.5, vec![1.0]).unwrap();
        let p = SpectralProfile::build_mollified(&g, 0.5, 1.0).unwrap();
        assert!(p.eval_phi_hat(0.99) > 0.0);
        assert_eq!(p.eval_phi_hat(1.0), 0.0);
    }

    #[test]
    fn small_base_ball_three_dimensional_value() {
        // base ball of radius b < eps around the origin: phi_hat(0) is the integral of
        // eta over |k'| < b, a one-dimensional radial integral
        let eps = 0.6 * K0;
        let b = 0.4 * K0;
        let g = SpectralProfile::polynomial(3, b, vec![1.0]).unwrap();
        let p = SpectralProfile::build_mollified(&g, eps, K0).unwrap();
        let rule = gauss_legendre(32);
        let oracle = 4.0 * PI * rule.integrate_panels(0.0, b, 64, |s| s * s * mollifier(s, eps));
        assert!((p.phi_hat_at_zero() - oracle).abs() < 1e-10 * oracle);
    }

    #[test]
    fn rejects_bad_widths_and_negative_base() {
        let g = SpectralProfile::polynomial(3, 0.5 * K0, vec![1.0]).unwrap();
        assert!(matches!(
            SpectralProfile::build_mollified(&g, 0.0, K0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            SpectralProfile::build_mollified(&g, K0, K0),
            Err(Error::InvalidParameter(_))
        ));
        // base reaching past K0 - eps
        assert!(SpectralProfile::build_mollified(&g, 0.6 * K0, K0).is_err());
        // negative base samples are rejected when the base is built
        assert!(matches!(
            SpectralProfile::polynomial(3, 0.5 * K0, vec![-1.0]),
            Err(Error::InvalidProfile(_))
        ));
    }

    #[test]
    fn mollified_profile_is_nonnegative_and_monotone_for_bump_base() {
        let g = SpectralProfile::bump(3, 0.5 * K0, 1.0).unwrap();
        let p = SpectralProfile::build_mollified(&g, 0.5 * K0, K0).unwrap();
        let floor = 1e-15 * p.phi_hat_at_zero();
        let mut prev = f64::INFINITY;
        for i in 0..=2000 {
            let v = p.eval_phi_hat(K0 * i as f64 / 2000.0);
            assert!(v >= 0.0);
            assert!(v <= prev * (1.0 + 1e-12) + floor, "k={} v={v:e} prev={prev:e}", K0 * i as f64 / 2000.0);
            prev = v;
        }
    }
}
