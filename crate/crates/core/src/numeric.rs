//! Quadrature and scalar root finding shared by the rate and distribution code.

use std::sync::OnceLock;

const GL_ORDER: usize = 10;
const MAX_DEPTH: u32 = 40;

/// Gauss–Legendre nodes and weights on [-1, 1], computed once by Newton
/// iteration on the Legendre polynomial.
fn gauss_legendre_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        let mut rule = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            rule.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
        }
        rule
    })
}

/// P_n(x) and P_n'(x) via the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Single fixed-order Gauss–Legendre panel over [a, b].
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    gauss_legendre_rule()
        .iter()
        .map(|&(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Adaptive Gauss–Legendre quadrature of `f` over [a, b] to absolute tolerance `tol`,
/// or to roundoff when `tol` is below what the magnitude of the integral allows.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let whole = gauss_legendre(f, a, b);
    adapt(f, a, b, whole, tol, 0)
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let left = gauss_legendre(f, a, m);
    let right = gauss_legendre(f, m, b);
    let halves = left + right;
    // Below a few ulps of the panel value the estimate is roundoff, not error.
    let floor = 64.0 * f64::EPSILON * halves.abs();
    if (halves - whole).abs() <= tol.max(floor) || depth >= MAX_DEPTH {
        return halves;
    }
    adapt(f, a, m, left, 0.5 * tol, depth + 1) + adapt(f, m, b, right, 0.5 * tol, depth + 1)
}

/// Solves `f(t) = 0` for nondecreasing `f` with derivative `df` on a bracket
/// `[lo, hi]` where `f(lo) <= 0 <= f(hi)`. Newton steps are taken when they
/// stay inside the bracket, bisection otherwise.
pub fn newton_bisect<F, D>(f: F, df: D, mut lo: f64, mut hi: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let v = f(t);
        if v == 0.0 {
            return t;
        }
        if v < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        if hi - lo <= tol {
            break;
        }
        let d = df(t);
        let newton = t - v / d;
        let next = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - t).abs() <= 0.25 * tol {
            return next;
        }
        t = next;
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_weights_sum_to_two() {
        let sum: f64 = gauss_legendre_rule().iter().map(|&(_, w)| w).sum();
        assert!((sum - 2.0).abs() < 1e-13);
    }

    #[test]
    fn single_panel_is_exact_for_high_degree_polynomials() {
        // Exact for degree <= 2n - 1 = 19.
        let f = |x: f64| x.powi(19) + 3.0 * x.powi(8);
        let exact = (2f64.powi(20) - 1.0) / 20.0 + 3.0 * (2f64.powi(9) - 1.0) / 9.0;
        assert!((gauss_legendre(&f, 1.0, 2.0) - exact).abs() < 1e-9);
    }

    #[test]
    fn adaptive_handles_a_kink() {
        let f = |x: f64| (x - 0.3).abs();
        let exact = 0.5 * 0.3 * 0.3 + 0.5 * 0.7 * 0.7;
        assert!((integrate(&f, 0.0, 1.0, 1e-12) - exact).abs() < 1e-11);
    }

    #[test]
    fn newton_bisect_finds_cube_root() {
        let r = newton_bisect(|t| t * t * t - 2.0, |t| 3.0 * t * t, 0.0, 2.0, 1e-14);
        assert!((r - 2f64.cbrt()).abs() < 1e-12);
    }

    #[test]
    fn newton_bisect_survives_flat_derivative() {
        // df = 0 at the start point forces bisection.
        let r = newton_bisect(|t| (t - 0.7).powi(3), |t| 3.0 * (t - 0.7).powi(2), 0.0, 1.4, 1e-12);
        assert!((r - 0.7).abs() < 1e-4);
    }
}
