//! Dense symmetric eigenvalue solver: Householder tridiagonalization followed
//! by implicit-shift QL iteration, eigenvalues only.
//!
//! The solver is deliberately self-contained and deterministic: the same
//! matrix always produces the same eigenvalue list, and a single
//! decomposition never spawns threads. Inputs are expected to be positive
//! semidefinite (sample covariance matrices); tiny negative round-off
//! eigenvalues are clamped to zero, anything clearly negative is reported as
//! a failure.

use crate::{Error, Result};

/// A dense symmetric matrix, stored row-major and validated on construction.
#[derive(Debug, Clone)]
pub struct SymMatrix {
    p: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Wraps a row-major `p x p` buffer, checking shape and symmetry
    /// (entrywise within `1e-10` relative to the largest magnitude).
    pub fn new(p: usize, data: Vec<f64>) -> Result<Self> {
        if p == 0 {
            return Err(Error::index("p", 0, "p >= 1"));
        }
        if data.len() != p * p {
            return Err(Error::index("data length", data.len(), format!("p*p = {}", p * p)));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse("matrix entries must be finite".into()));
        }
        let scale = data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..p {
            for j in 0..i {
                let diff = (data[i * p + j] - data[j * p + i]).abs();
                if diff > 1e-10 * scale.max(1.0) {
                    return Err(Error::domain(
                        "asymmetry",
                        diff,
                        format!("|S[{i},{j}] - S[{j},{i}]| <= 1e-10 * scale"),
                    ));
                }
            }
        }
        Ok(SymMatrix { p, data })
    }

    /// Internal constructor for matrices symmetric by construction.
    pub(crate) fn from_symmetric_parts(p: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), p * p);
        SymMatrix { p, data }
    }

    /// Matrix order `p`.
    pub fn order(&self) -> usize {
        self.p
    }

    /// Entry `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.p && j < self.p);
        self.data[i * self.p + j]
    }

    /// Sum of the diagonal.
    pub fn trace(&self) -> f64 {
        (0..self.p).map(|i| self.data[i * self.p + i]).sum()
    }
}

/// All eigenvalues of a symmetric positive semidefinite matrix, sorted
/// nonincreasing. Magnitudes below `1e-12 * d_1` are clamped to exact zero so
/// that rank-deficient inputs (e.g. covariance of fewer samples than
/// dimensions) report their structural zeros exactly; a residual clearly
/// negative eigenvalue is reported as [`Error::Convergence`].
pub fn eigvals_sym(s: &SymMatrix) -> Result<Vec<f64>> {
    let p = s.order();
    let mut a = s.data.clone();
    let (mut d, mut e) = tridiagonalize(&mut a, p);
    e.push(0.0); // workspace slot used by the QL sweeps
    tql_eigenvalues(&mut d, &mut e)?;
    d.sort_by(|x, y| y.partial_cmp(x).expect("eigenvalues are finite"));
    let top = d[0];
    let thr = 1e-12 * top.max(0.0);
    for v in &mut d {
        if v.abs() < thr {
            *v = 0.0;
        }
    }
    if let Some(&worst) = d.last() {
        if worst < 0.0 {
            return Err(Error::Convergence(format!(
                "eigenvalue {worst} is negative beyond round-off for a PSD input"
            )));
        }
    }
    Ok(d)
}

/// Reduces the symmetric matrix held in `a` (row-major, lower triangle
/// authoritative) to tridiagonal form by Householder similarity transforms.
/// Returns the diagonal and the subdiagonal.
fn tridiagonalize(a: &mut [f64], p: usize) -> (Vec<f64>, Vec<f64>) {
    let mut off = vec![0.0; p.saturating_sub(1)];
    let mut v = vec![0.0; p];
    let mut w = vec![0.0; p];
    for k in 0..p.saturating_sub(2) {
        let m = p - k - 1; // order of the trailing block
        let col0 = k + 1; // first row of the trailing block
        let mut sig2 = 0.0;
        for i in 0..m {
            let x = a[(col0 + i) * p + k];
            sig2 += x * x;
        }
        if sig2 == 0.0 {
            off[k] = 0.0;
            continue;
        }
        let sigma = sig2.sqrt();
        let x0 = a[col0 * p + k];
        let alpha = if x0 >= 0.0 { -sigma } else { sigma };
        off[k] = alpha;
        // Householder vector v = x - alpha*e1; beta = 2 / (v'v).
        v[0] = x0 - alpha;
        for i in 1..m {
            v[i] = a[(col0 + i) * p + k];
        }
        let beta = 1.0 / (alpha * (alpha - x0));
        // w := beta * A22 * v, reading only the lower triangle of A22.
        for wi in w[..m].iter_mut() {
            *wi = 0.0;
        }
        for i in 0..m {
            let row = (col0 + i) * p + col0;
            let vi = v[i];
            let mut acc = a[row + i] * vi;
            let (vh, _) = v.split_at(i);
            let (wh, _) = w.split_at_mut(i);
            for ((&aij, &vj), wj) in a[row..row + i].iter().zip(vh).zip(wh) {
                acc += aij * vj;
                *wj += aij * vi;
            }
            w[i] += acc;
        }
        let mut vw = 0.0;
        for i in 0..m {
            w[i] *= beta;
            vw += v[i] * w[i];
        }
        // w := w - (beta/2)(w'v) v, then A22 -= v w' + w v'.
        let t = 0.5 * beta * vw;
        for i in 0..m {
            w[i] -= t * v[i];
        }
        for i in 0..m {
            let row = (col0 + i) * p + col0;
            let vi = v[i];
            let wi = w[i];
            for ((aij, &vj), &wj) in a[row..=row + i].iter_mut().zip(&v[..=i]).zip(&w[..=i]) {
                *aij -= vi * wj + wi * vj;
            }
        }
    }
    if p >= 2 {
        off[p - 2] = a[(p - 1) * p + (p - 2)];
    }
    let diag = (0..p).map(|i| a[i * p + i]).collect();
    (diag, off)
}

/// Implicit-shift QL iteration on a tridiagonal matrix; `d` holds the
/// diagonal, `e` the subdiagonal with one trailing workspace slot. On return
/// `d` holds the (unsorted) eigenvalues.
fn tql_eigenvalues(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    if n <= 1 {
        return Ok(());
    }
    let eps = f64::EPSILON;
    // Absolute deflation floor at the scale of the whole matrix. Rank-null
    // blocks of a PSD Gram matrix are round-off noise in which neighboring
    // diagonals are as tiny as the off-diagonals, so a purely
    // neighbor-relative test would never deflate them.
    let anorm = d.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        + e.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = eps * anorm;
    for l in 0..n {
        let mut iter = 0usize;
        loop {
            // Find the first negligible subdiagonal at or after l.
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd || e[m].abs() <= floor {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(Error::Convergence(format!(
                    "QL sweep budget exhausted at eigenvalue {l} of {n}"
                )));
            }
            // Wilkinson-style shift from the leading 2x2.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0f64;
            let mut c = 1.0f64;
            let mut pp = 0.0f64;
            let mut i = m - 1;
            let mut aborted = false;
            loop {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    // Rotation annihilated early; drop the shift and restart.
                    d[i + 1] -= pp;
                    e[m] = 0.0;
                    aborted = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - pp;
                r = (d[i] - g) * s + 2.0 * c * b;
                pp = s * r;
                d[i + 1] = g + pp;
                g = c * r - b;
                if i == l {
                    break;
                }
                i -= 1;
            }
            if aborted {
                continue;
            }
            d[l] -= pp;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
