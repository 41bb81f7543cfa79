//! Fixed-order Gauss–Legendre quadrature.
//!
//! All integrals in this crate run through one deterministic rule of fixed
//! order so that results are bit-reproducible across runs and platforms with
//! the same floating-point semantics. Order 200 integrates polynomials up to
//! degree 399 exactly, far beyond what the smooth trigonometric integrands in
//! [`crate::mp`] need for 1e-12 accuracy.

use std::sync::OnceLock;

/// Order of the quadrature rule used throughout the crate.
pub const ORDER: usize = 200;

static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();

/// Nodes and weights of the order-[`ORDER`] Gauss–Legendre rule on [-1, 1].
pub fn rule() -> &'static [(f64, f64)] {
    RULE.get_or_init(|| gauss_legendre(ORDER))
}

/// Computes nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1]
/// by Newton iteration on the Legendre polynomial, seeded with the Chebyshev
/// root approximation. Nodes come out in increasing order.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 2);
    let mut out = vec![(0.0, 0.0); n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Initial guess for the i-th root (counted from the upper end).
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(x) and its derivative via the three-term recurrence.
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * x * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (x * p1 - p2) / (x * x - 1.0);
            let dx = p1 / pp;
            x -= dx;
            if dx.abs() <= 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * pp * pp);
        out[i] = (-x, w);
        out[n - 1 - i] = (x, w);
    }
    out
}

/// Integrates `f` over `[lo, hi]` with the fixed rule. Exact direction:
/// returns 0 for an empty interval and the signed integral if `lo > hi`.
pub fn integrate(lo: f64, hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut acc = 0.0;
    for &(x, w) in rule() {
        acc += w * f(mid + half * x);
    }
    acc * half
}
