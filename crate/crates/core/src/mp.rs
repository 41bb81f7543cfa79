//! The Marchenko–Pastur law and the spike transforms built on it.
//!
//! For aspect ratio `c = p/n > 0` the Marchenko–Pastur law `F_c` has the
//! continuous density
//!
//! ```text
//! f_c(x) = sqrt((b - x)(x - a)) / (2 pi x c),   a < x < b,
//! a = (1 - sqrt(c))^2,  b = (1 + sqrt(c))^2,
//! ```
//!
//! plus, when `c > 1`, a point mass of `1 - 1/c` at zero. A population spike
//! `lambda` above the phase transition `1 + sqrt(c)` pushes a sample
//! eigenvalue to `psi(lambda) = lambda + c*lambda/(lambda - 1)`, which lies
//! above the bulk edge `b`; everything below the transition is absorbed by
//! the bulk and carries no signal that the criteria could use.
//!
//! The integral transforms
//!
//! ```text
//! m1(d) = ∫ x/(d - x)   dF_c(x),
//! m2(d) = ∫ x/(d - x)^2 dF_c(x),      d > b,
//! ```
//!
//! are evaluated by fixed-order Gauss–Legendre quadrature after the
//! substitution `x = a + 2h sin^2(u/2)` with `h = (b - a)/2`, which maps the
//! support to `u ∈ [0, pi]`, absorbs the square-root edge singularities into
//! a smooth `sin^2 u` factor, and stays numerically stable at `c = 1` where
//! the lower edge touches zero. The point mass at zero contributes nothing
//! to either transform because the integrands vanish there.

use crate::quad;
use crate::{Error, Result};

/// The Marchenko–Pastur law with a fixed aspect ratio.
#[derive(Debug, Clone, Copy)]
pub struct MpLaw {
    c: f64,
    a: f64,
    b: f64,
}

/// Consistency gap diagnostics for the smallest spike; see
/// [`MpLaw::gap_margin`].
#[derive(Debug, Clone, Copy)]
pub struct GapMargin {
    /// `psi(lambda_k) - 1 - log psi(lambda_k) - 2c`; positive iff the plain
    /// AIC-type criterion separates `k` from `k-1` asymptotically.
    pub aic_gap: f64,
    /// `psi(lambda_k)/c - 1 - log(psi(lambda_k)/c) - 2/c`; the analogous gap
    /// for the quasi-AIC regime used when `c` is large.
    pub quasi_aic_gap: f64,
    /// Largest penalty multiplier `kappa` with
    /// `psi(lambda_k) - 1 - log psi(lambda_k) > 2 c kappa`; together with
    /// [`varphi`] this brackets the consistent multiplier window.
    pub kappa: f64,
}

impl MpLaw {
    /// Creates the law for aspect ratio `c > 0`.
    pub fn new(c: f64) -> Result<Self> {
        if !c.is_finite() || c <= 0.0 {
            return Err(Error::domain("c", c, "c > 0 and finite"));
        }
        let s = c.sqrt();
        Ok(MpLaw {
            c,
            a: (1.0 - s) * (1.0 - s),
            b: (1.0 + s) * (1.0 + s),
        })
    }

    /// Aspect ratio `c`.
    pub fn c(&self) -> f64 {
        self.c
    }

    /// Lower support edge `a = (1 - sqrt(c))^2`.
    pub fn lower_edge(&self) -> f64 {
        self.a
    }

    /// Upper support edge `b = (1 + sqrt(c))^2`.
    pub fn upper_edge(&self) -> f64 {
        self.b
    }

    /// Phase transition `1 + sqrt(c)`: spikes at or below this value do not
    /// separate from the bulk.
    pub fn threshold(&self) -> f64 {
        1.0 + self.c.sqrt()
    }

    /// Density of the continuous part; zero outside the open support.
    pub fn density(&self, x: f64) -> f64 {
        if x <= self.a || x >= self.b {
            return 0.0;
        }
        ((self.b - x) * (x - self.a)).sqrt() / (2.0 * std::f64::consts::PI * x * self.c)
    }

    /// Integral over `u ∈ [0, hi]` of `sin^2(u) * g(x(u))` scaled by
    /// `h^2 / (2 pi c)`, where `x(u) = a + 2h sin^2(u/2)`.
    fn arc_integral(&self, hi: f64, g: impl Fn(f64) -> f64) -> f64 {
        let h = 0.5 * (self.b - self.a);
        let scale = h * h / (2.0 * std::f64::consts::PI * self.c);
        scale
            * quad::integrate(0.0, hi, |u| {
                let s = (0.5 * u).sin();
                let x = self.a + 2.0 * h * s * s;
                let su = u.sin();
                su * su * g(x)
            })
    }

    /// Cumulative distribution function, right-continuous, including the
    /// point mass at zero when `c > 1`.
    pub fn cdf(&self, x: f64) -> f64 {
        let atom = if self.c > 1.0 { 1.0 - 1.0 / self.c } else { 0.0 };
        if x < 0.0 {
            0.0
        } else if x < self.a {
            atom
        } else if x >= self.b {
            1.0
        } else {
            let frac = ((x - self.a) / (self.b - self.a)).clamp(0.0, 1.0);
            let hi = 2.0 * frac.sqrt().asin();
            atom + self.arc_integral(hi, |t| 1.0 / t)
        }
    }

    /// Total mass of the continuous part: `min(1, 1/c)`.
    pub fn bulk_mass(&self) -> f64 {
        self.arc_integral(std::f64::consts::PI, |t| 1.0 / t)
    }

    /// Almost-sure limit of the sample eigenvalue generated by a population
    /// spike `lambda` above the phase transition.
    pub fn psi(&self, lambda: f64) -> Result<f64> {
        self.check_distant(lambda)?;
        Ok(lambda + self.c * lambda / (lambda - 1.0))
    }

    /// Inverse of [`MpLaw::psi`] for `d` above the bulk edge `b`.
    pub fn psi_inv(&self, d: f64) -> Result<f64> {
        self.check_above_bulk(d)?;
        // Discriminant is nonnegative exactly for d >= b; clamp the rounding
        // dust just above the edge.
        let disc = ((self.c - d - 1.0) * (self.c - d - 1.0) - 4.0 * d).max(0.0);
        Ok((-self.c + d + 1.0 + disc.sqrt()) / 2.0)
    }

    /// The transform `m1(d) = ∫ x/(d-x) dF_c(x)` for `d > b`.
    pub fn m1(&self, d: f64) -> Result<f64> {
        self.check_above_bulk(d)?;
        Ok(self.arc_integral(std::f64::consts::PI, |t| 1.0 / (d - t)))
    }

    /// The transform `m2(d) = ∫ x/(d-x)^2 dF_c(x) = -m1'(d)` for `d > b`.
    pub fn m2(&self, d: f64) -> Result<f64> {
        self.check_above_bulk(d)?;
        Ok(self.arc_integral(std::f64::consts::PI, |t| 1.0 / ((d - t) * (d - t))))
    }

    /// Limiting variance of `sqrt(n) (d_1 - psi(lambda)) / lambda` for a
    /// distant spike of a Gaussian population with diagonal spike block:
    /// `2 - 2c/(lambda-1)^2`. Defined on `lambda >= 1 + sqrt(c)`; the value
    /// is 0 at the transition itself and approaches 2 as `lambda` grows.
    pub fn limit_variance(&self, lambda: f64) -> Result<f64> {
        let thr = self.threshold();
        if !lambda.is_finite() || lambda < thr {
            return Err(Error::domain(
                "lambda",
                lambda,
                format!("lambda >= 1 + sqrt(c) = {thr}"),
            ));
        }
        let g = lambda - 1.0;
        Ok((2.0 - 2.0 * self.c / (g * g)).max(0.0))
    }

    /// Margins of the two consistency gap conditions at the smallest spike,
    /// plus the implied largest admissible penalty multiplier `kappa`.
    pub fn gap_margin(&self, lambda_k: f64) -> Result<GapMargin> {
        let psi = self.psi(lambda_k)?;
        let aic_gap = psi - 1.0 - psi.ln() - 2.0 * self.c;
        let q = psi / self.c;
        let quasi_aic_gap = q - 1.0 - q.ln() - 2.0 / self.c;
        let kappa = (psi - 1.0 - psi.ln()) / (2.0 * self.c);
        Ok(GapMargin {
            aic_gap,
            quasi_aic_gap,
            kappa,
        })
    }

    fn check_distant(&self, lambda: f64) -> Result<()> {
        let thr = self.threshold();
        if !lambda.is_finite() || lambda <= thr {
            return Err(Error::domain(
                "lambda",
                lambda,
                format!("lambda > 1 + sqrt(c) = {thr}"),
            ));
        }
        Ok(())
    }

    fn check_above_bulk(&self, d: f64) -> Result<()> {
        if !d.is_finite() || d <= self.b {
            return Err(Error::domain(
                "d",
                d,
                format!("d > upper edge b = {}", self.b),
            ));
        }
        Ok(())
    }
}

/// The lower bound `varphi(c) = 1/2 + sqrt(1/c) - log(1 + sqrt(c))/c` of the
/// consistent penalty-multiplier window; lies in `(0, 1)` for every `c > 0`.
pub fn varphi(c: f64) -> Result<f64> {
    if !c.is_finite() || c <= 0.0 {
        return Err(Error::domain("c", c, "c > 0 and finite"));
    }
    Ok(0.5 + (1.0 / c).sqrt() - (1.0 + c.sqrt()).ln() / c)
}
