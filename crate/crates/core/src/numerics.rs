//! Small numerical building blocks shared by the rest of the crate:
//! Gauss-Legendre rules, compensated summation, the order-zero Bessel
//! function and monotone cubic interpolation on uniform grids.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Nodes and weights of an `n`-point Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> GaussLegendre {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = (n + 1) / 2;
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Integrate `f` over `[a, b]` with this rule.
    #[inline]
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let mut sum = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            sum += w * f(mid + half * x);
        }
        sum * half
    }

    /// Composite rule: `[a, b]` split into `panels` equal panels.
    pub fn integrate_panels<F: FnMut(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        mut f: F,
    ) -> f64 {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        let mut acc = NeumaierSum::new();
        for p in 0..panels {
            let lo = a + h * p as f64;
            let hi = if p + 1 == panels { b } else { lo + h };
            acc.add(self.integrate(lo, hi, &mut f));
        }
        acc.sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Shared rules used throughout the crate.
pub fn gauss_legendre(n: usize) -> &'static GaussLegendre {
    static GL3: OnceLock<GaussLegendre> = OnceLock::new();
    static GL8: OnceLock<GaussLegendre> = OnceLock::new();
    static GL16: OnceLock<GaussLegendre> = OnceLock::new();
    static GL32: OnceLock<GaussLegendre> = OnceLock::new();
    match n {
        3 => GL3.get_or_init(|| GaussLegendre::new(3)),
        8 => GL8.get_or_init(|| GaussLegendre::new(8)),
        16 => GL16.get_or_init(|| GaussLegendre::new(16)),
        32 => GL32.get_or_init(|| GaussLegendre::new(32)),
        _ => panic!("no shared Gauss-Legendre rule with {n} nodes"),
    }
}

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> NeumaierSum {
        NeumaierSum::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn sum(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of an iterator.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<NeumaierSum>().sum()
}

/// Argument at which `bessel_j0` switches from the ascending series to the
/// Hankel asymptotic expansion.
pub const BESSEL_J0_CROSSOVER: f64 = 12.0;

/// Bessel function of the first kind of order zero.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x < BESSEL_J0_CROSSOVER {
        // sum_m (-1)^m (x/2)^{2m} / (m!)^2
        let q = -0.25 * x * x;
        let mut term = 1.0;
        let mut acc = NeumaierSum::new();
        acc.add(term);
        for m in 1..200 {
            let mf = m as f64;
            term *= q / (mf * mf);
            acc.add(term);
            if term.abs() < 1e-18 {
                break;
            }
        }
        acc.sum()
    } else {
        // Hankel expansion: a_k = prod_{j<=k} (4nu^2 - (2j-1)^2) / (k! 8^k),
        // P collects even k, Q odd k, each with alternating sign.
        let mut p = 1.0;
        let mut q = 0.0;
        let mut a = 1.0;
        let mut last = f64::INFINITY;
        for k in 1..60 {
            let odd = (2 * k - 1) as f64;
            a *= -odd * odd / (8.0 * k as f64 * x);
            if a.abs() >= last || a.abs() < 1e-17 {
                break;
            }
            last = a.abs();
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            if k % 2 == 0 {
                p += sign * a;
            } else {
                q += sign * a;
            }
        }
        let chi = x - 0.25 * PI;
        (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
    }
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes) on
/// a uniform grid starting at zero. The first sample is treated as a
/// symmetric extremum, matching an even function of `x`.
#[derive(Debug, Clone)]
pub struct UniformPchip {
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl UniformPchip {
    /// `values[i]` is the sample at `i * step`. The slope at the last node is
    /// forced to zero when `clamp_end` is set.
    pub fn new(step: f64, values: Vec<f64>, clamp_end: bool) -> UniformPchip {
        let n = values.len();
        assert!(n >= 2, "need at least two samples");
        let secants: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]) / step).collect();
        let mut slopes = vec![0.0; n];
        for i in 1..n - 1 {
            let (a, b) = (secants[i - 1], secants[i]);
            slopes[i] = if a * b <= 0.0 { 0.0 } else { 2.0 * a * b / (a + b) };
        }
        slopes[0] = 0.0;
        slopes[n - 1] = if clamp_end {
            0.0
        } else {
            // one-sided three-point estimate, limited to keep monotonicity
            let d = if n > 2 {
                0.5 * (3.0 * secants[n - 2] - secants[n - 3])
            } else {
                secants[0]
            };
            if d * secants[n - 2] <= 0.0 {
                0.0
            } else if d.abs() > 3.0 * secants[n - 2].abs() {
                3.0 * secants[n - 2]
            } else {
                d
            }
        };
        UniformPchip { step, values, slopes }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Upper end of the grid.
    pub fn end(&self) -> f64 {
        self.step * (self.values.len() - 1) as f64
    }

    /// Evaluate at `x` (clamped to the grid).
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        if x <= 0.0 {
            return self.values[0];
        }
        let s = x / self.step;
        let mut i = s.floor() as usize;
        if i >= n - 1 {
            if i == n - 1 && s == (n - 1) as f64 {
                return self.values[n - 1];
            }
            i = n - 2;
            if s > (n - 1) as f64 {
                return self.values[n - 1];
            }
        }
        let t = s - i as f64;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * self.step, self.slopes[i + 1] * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1
    }
}

/// Result of [`nelder_mead`].
#[derive(Debug, Clone)]
pub struct Simplex {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Derivative-free Nelder-Mead minimization with standard coefficients.
/// Stops when the spread of simplex values falls below
/// `ftol * (|f_best| + tiny)` or after `max_evals` evaluations.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: f64,
    ftol: f64,
    max_evals: usize,
) -> Simplex {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    let mut evals = n + 1;
    while evals < max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let (best, worst) = (vals[0], vals[n]);
        if (worst - best).abs() <= ftol * (best.abs() + 1e-300) {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (pts[n][j] - centroid[j])).collect() };
        let xr = along(-1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let x = along(-0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = f(&x);
                (x, v)
            };
            evals += 1;
            if fc < vals[n].min(fr) {
                pts[n] = xc;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    for j in 0..n {
                        pts[i][j] = pts[0][j] + 0.5 * (pts[i][j] - pts[0][j]);
                    }
                    vals[i] = f(&pts[i]);
                }
                evals += n;
            }
        }
    }
    let i = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    Simplex {
        x: pts[i].clone(),
        value: vals[i],
        evaluations: evals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for n in [3usize, 8, 16, 32] {
            let rule = GaussLegendre::new(n);
            let wsum: f64 = rule.weights.iter().sum();
            assert!((wsum - 2.0).abs() < 1e-14);
            // degree 2n-1 monomial x^(2n-2) integrates to 2/(2n-1)
            let deg = 2 * n - 2;
            let v = rule.integrate(-1.0, 1.0, |x| x.powi(deg as i32));
            assert!((v - 2.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn composite_rule_on_oscillatory_integrand() {
        let rule = gauss_legendre(16);
        let v = rule.integrate_panels(0.0, 50.0, 40, |x| x.cos());
        assert!((v - 50.0_f64.sin()).abs() < 1e-13);
    }

    #[test]
    fn neumaier_recovers_cancelled_terms() {
        let v = compensated_sum([1.0, 1e100, 1.0, -1e100]);
        assert_eq!(v, 2.0);
    }

    #[test]
    fn bessel_j0_reference_values() {
        // reference values from scipy.special.j0
        let cases = [
            (0.0, 1.0),
            (1.0, 0.7651976865579666),
            (2.404825557695773, 0.0),
            (5.0, -0.1775967713143383),
            (10.0, -0.2459357644513483),
            (11.99, 0.045451560352858814),
            (12.0, 0.04768931079683335),
            (20.0, 0.16702466434058316),
            (100.0, 0.019985850304223122),
        ];
        for (x, expected) in cases {
            let got = bessel_j0(x);
            assert!((got - expected).abs() < 2e-12, "J0({x}) = {got}, expected {expected}");
        }
    }

    #[test]
    fn pchip_reproduces_samples_and_stays_monotone() {
        let step = 0.1;
        let values: Vec<f64> = (0..30).map(|i| (-(i as f64 * step).powi(2)).exp()).collect();
        let interp = UniformPchip::new(step, values.clone(), true);
        for (i, v) in values.iter().enumerate() {
            assert!((interp.eval(i as f64 * step) - v).abs() < 1e-15);
        }
        let mut prev = f64::INFINITY;
        for j in 0..2900 {
            let y = interp.eval(j as f64 * 0.001);
            assert!(y <= prev + 1e-15);
            assert!(y >= 0.0);
            prev = y;
        }
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let r = nelder_mead(
            |x| (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2) + 3.0,
            &[0.0, 0.0],
            0.5,
            1e-15,
            10_000,
        );
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] + 2.0).abs() < 1e-6);
        assert!((r.value - 3.0).abs() < 1e-12);
    }
}
