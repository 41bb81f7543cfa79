//! Population models and sample spectra.
//!
//! The population covariance is diagonal: `k` spiked eigenvalues greater
//! than one followed by `p - k` ones. Data rows are i.i.d. with independent
//! coordinates scaled by the square roots of those eigenvalues; the noise
//! distribution is standardized Gaussian, uniform, or Rademacher. Sampling
//! is deterministic given `(seed, replication, row)`: each row draws from
//! its own counter-derived stream, so results do not depend on the order in
//! which rows or replications are generated.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eigen::{self, SymMatrix};
use crate::{Error, Result};

/// Distribution of the standardized noise coordinates (mean 0, variance 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// Standard normal, via Box-Muller.
    Gaussian,
    /// Uniform on `[-sqrt(3), sqrt(3)]`.
    Uniform,
    /// Symmetric +/-1 coin flips.
    Rademacher,
}

impl NoiseKind {
    /// Fourth moment `E z^4` of the standardized coordinate distribution
    /// (3 Gaussian, 9/5 uniform, 1 Rademacher). Drives the limiting
    /// variance of the largest sample eigenvalue for non-Gaussian noise.
    pub fn fourth_moment(self) -> f64 {
        match self {
            NoiseKind::Gaussian => 3.0,
            NoiseKind::Uniform => 1.8,
            NoiseKind::Rademacher => 1.0,
        }
    }
}

impl std::fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Uniform => "uniform",
            NoiseKind::Rademacher => "rademacher",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(NoiseKind::Gaussian),
            "uniform" => Ok(NoiseKind::Uniform),
            "rademacher" => Ok(NoiseKind::Rademacher),
            other => Err(Error::Parse(format!(
                "unknown noise kind {other:?}; expected gaussian, uniform, or rademacher"
            ))),
        }
    }
}

/// Diagonal population covariance with `k` spikes above 1 and `p - k` unit
/// eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikedPopulation {
    p: usize,
    spikes: Vec<f64>,
}

impl SpikedPopulation {
    /// Builds a population of dimension `p` with the given spiked
    /// eigenvalues. Requires `1 <= spikes.len() < p` and every spike `> 1`;
    /// spikes are stored in nonincreasing order.
    pub fn new(p: usize, mut spikes: Vec<f64>) -> Result<Self> {
        if spikes.is_empty() {
            return Err(Error::index("number of spikes", 0, "k >= 1"));
        }
        if spikes.len() >= p {
            return Err(Error::index("number of spikes", spikes.len(), format!("k < p = {p}")));
        }
        for &s in &spikes {
            if !(s.is_finite() && s > 1.0) {
                return Err(Error::domain("spike eigenvalue", s, "spike > 1"));
            }
        }
        spikes.sort_by(|a, b| b.partial_cmp(a).expect("spikes are finite"));
        Ok(SpikedPopulation { p, spikes })
    }

    /// Dimension `p`.
    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of spikes `k`.
    pub fn k(&self) -> usize {
        self.spikes.len()
    }

    /// Spiked eigenvalues, nonincreasing.
    pub fn spikes(&self) -> &[f64] {
        &self.spikes
    }

    /// Population eigenvalue `i` (0-based): a spike for `i < k`, else 1.
    pub fn eigenvalue(&self, i: usize) -> f64 {
        if i < self.spikes.len() {
            self.spikes[i]
        } else {
            1.0
        }
    }
}

/// The simulation design used throughout: `k` spikes with a signal floor of
/// `snr` above 1. The smallest spike is `1 + snr` and the remaining `k - 1`
/// equal `1 + 2 snr`, so the detection difficulty is governed by `snr`
/// alone.
pub fn build_population(p: usize, k: usize, snr: f64) -> Result<SpikedPopulation> {
    if !(snr.is_finite() && snr > 0.0) {
        return Err(Error::domain("snr", snr, "snr > 0"));
    }
    let mut spikes = vec![1.0 + 2.0 * snr; k.saturating_sub(1)];
    spikes.push(1.0 + snr);
    SpikedPopulation::new(p, spikes)
}

/// Design signal strength that scales with the sample size:
/// `snr = 2 delta * sqrt((p - k/2 + 1/2) * lnln(n) / n)`. The factor under
/// the root is the per-spike parameter count, so `delta` measures distance
/// from the detection boundary of the dimension-adjusted criteria.
pub fn snr_fixed_p(delta: f64, p: usize, k: usize, n: usize) -> Result<f64> {
    if k > p {
        return Err(Error::index("k", k, format!("k <= p = {p}")));
    }
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::domain("delta", delta, "delta >= 0"));
    }
    let lnln = (n as f64).ln().ln();
    if !(lnln.is_finite() && lnln > 0.0) {
        return Err(Error::domain("n", n as f64, "ln(ln n) > 0 requires n >= 3"));
    }
    Ok(2.0 * delta * ((p as f64 - k as f64 / 2.0 + 0.5) * lnln / n as f64).sqrt())
}

/// An `n x p` data matrix, rows are observations, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl DataMatrix {
    /// Wraps a row-major `n x p` buffer.
    pub fn new(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::index("matrix dimension", 0, "n >= 1 and p >= 1"));
        }
        if data.len() != n * p {
            return Err(Error::index("data length", data.len(), format!("n*p = {}", n * p)));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse("data entries must be finite".into()));
        }
        Ok(DataMatrix { n, p, data })
    }

    /// Number of rows (observations).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of columns (variables).
    pub fn p(&self) -> usize {
        self.p
    }

    /// Row `i` as a slice.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }
}

/// One standardized noise row of length `p`, written into `out`.
///
/// Gaussian variates come from Box-Muller applied to 53-bit uniforms in
/// `(0, 1]`; the spare variate of a final odd draw is dropped so that the
/// values a row receives never depend on `p`'s parity bookkeeping elsewhere.
fn fill_noise_row(rng: &mut ChaCha8Rng, kind: NoiseKind, out: &mut [f64]) {
    // Uniform in (0, 1]: (m + 1) * 2^-53 with m the top 53 bits.
    fn unit(rng: &mut ChaCha8Rng) -> f64 {
        ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / 9007199254740992.0)
    }
    match kind {
        NoiseKind::Gaussian => {
            let mut i = 0;
            while i < out.len() {
                let u1 = unit(rng);
                let u2 = unit(rng);
                let r = (-2.0 * u1.ln()).sqrt();
                let theta = 2.0 * std::f64::consts::PI * u2;
                out[i] = r * theta.cos();
                i += 1;
                if i < out.len() {
                    out[i] = r * theta.sin();
                    i += 1;
                }
            }
        }
        NoiseKind::Uniform => {
            let half_width = 3.0f64.sqrt();
            for x in out {
                *x = (2.0 * unit(rng) - 1.0) * half_width;
            }
        }
        NoiseKind::Rademacher => {
            for x in out {
                *x = if unit(rng) > 0.5 { 1.0 } else { -1.0 };
            }
        }
    }
}

/// Stream id for `(replication, row)`: the two indices packed into the
/// 64-bit ChaCha stream counter.
fn stream_id(rep: usize, row: usize) -> u64 {
    ((rep as u64) << 32) | (row as u64 & 0xffff_ffff)
}

/// Draws an `n x p` sample from the population for replication `rep` of the
/// stream keyed by `seed`. Row `i` uses the generator `(seed, rep, i)`, so
/// samples are reproducible and independent of generation order.
pub fn sample_population_rep(
    pop: &SpikedPopulation,
    n: usize,
    kind: NoiseKind,
    seed: u64,
    rep: usize,
) -> Result<DataMatrix> {
    if n == 0 {
        return Err(Error::index("n", 0, "n >= 1"));
    }
    if rep > u32::MAX as usize {
        return Err(Error::index("replication", rep, "rep < 2^32"));
    }
    let p = pop.p();
    let scale: Vec<f64> = (0..p).map(|j| pop.eigenvalue(j).sqrt()).collect();
    let base = ChaCha8Rng::seed_from_u64(seed);
    let mut data = vec![0.0; n * p];
    for (i, row) in data.chunks_mut(p).enumerate() {
        let mut rng = base.clone();
        rng.set_stream(stream_id(rep, i));
        fill_noise_row(&mut rng, kind, row);
        for (x, s) in row.iter_mut().zip(&scale) {
            *x *= s;
        }
    }
    DataMatrix::new(n, p, data)
}

/// Single-draw convenience wrapper: replication index 0.
pub fn sample_population(
    pop: &SpikedPopulation,
    n: usize,
    kind: NoiseKind,
    seed: u64,
) -> Result<DataMatrix> {
    sample_population_rep(pop, n, kind, seed, 0)
}

/// Pure-noise sample (identity population covariance), same stream layout
/// as [`sample_population_rep`]. Used for checking the spectral bulk
/// against its limit without any spike present.
pub fn sample_white_rep(
    n: usize,
    p: usize,
    kind: NoiseKind,
    seed: u64,
    rep: usize,
) -> Result<DataMatrix> {
    if n == 0 || p == 0 {
        return Err(Error::index("matrix dimension", 0, "n >= 1 and p >= 1"));
    }
    if rep > u32::MAX as usize {
        return Err(Error::index("replication", rep, "rep < 2^32"));
    }
    let base = ChaCha8Rng::seed_from_u64(seed);
    let mut data = vec![0.0; n * p];
    for (i, row) in data.chunks_mut(p).enumerate() {
        let mut rng = base.clone();
        rng.set_stream(stream_id(rep, i));
        fill_noise_row(&mut rng, kind, row);
    }
    DataMatrix::new(n, p, data)
}

/// Uncentered sample covariance `X'X / n`.
pub fn sample_covariance(x: &DataMatrix) -> SymMatrix {
    gram(x, None, x.n as f64)
}

/// Column-centered sample covariance with the unbiased `n - 1` divisor.
/// Requires at least two rows.
pub fn sample_covariance_centered(x: &DataMatrix) -> Result<SymMatrix> {
    if x.n < 2 {
        return Err(Error::index("n", x.n, "n >= 2 for centered covariance"));
    }
    let mut means = vec![0.0; x.p];
    for i in 0..x.n {
        for (m, v) in means.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= x.n as f64;
    }
    Ok(gram(x, Some(&means), (x.n - 1) as f64))
}

/// Accumulates `(X - 1 mu')' (X - 1 mu') / divisor` over the lower triangle
/// and mirrors it.
fn gram(x: &DataMatrix, center: Option<&[f64]>, divisor: f64) -> SymMatrix {
    let p = x.p;
    let mut s = vec![0.0; p * p];
    let mut shifted = vec![0.0; p];
    for i in 0..x.n {
        let row: &[f64] = match center {
            Some(mu) => {
                for ((d, v), m) in shifted.iter_mut().zip(x.row(i)).zip(mu) {
                    *d = v - m;
                }
                &shifted
            }
            None => x.row(i),
        };
        for a in 0..p {
            let ra = row[a];
            let dst = &mut s[a * p..a * p + a + 1];
            for (d, &rb) in dst.iter_mut().zip(&row[..a + 1]) {
                *d += ra * rb;
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            let v = s[a * p + b] / divisor;
            s[a * p + b] = v;
            s[b * p + a] = v;
        }
        s[a * p + a] /= divisor;
    }
    SymMatrix::from_symmetric_parts(p, s)
}

/// Eigenvalues of a sample covariance matrix, nonincreasing, together with
/// the sample size they came from. When `n < p` the trailing `p - n`
/// entries are exact zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpectrum {
    eigenvalues: Vec<f64>,
    n: usize,
}

impl SampleSpectrum {
    /// Wraps an eigenvalue list, sorting it nonincreasing and validating
    /// nonnegativity and finiteness.
    pub fn new(mut eigenvalues: Vec<f64>, n: usize) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::index("p", 0, "p >= 1"));
        }
        if n == 0 {
            return Err(Error::index("n", 0, "n >= 1"));
        }
        for &d in &eigenvalues {
            if !d.is_finite() {
                return Err(Error::Parse("eigenvalues must be finite".into()));
            }
            if d < 0.0 {
                return Err(Error::domain("eigenvalue", d, "d >= 0"));
            }
        }
        eigenvalues.sort_by(|a, b| b.partial_cmp(a).expect("eigenvalues are finite"));
        Ok(SampleSpectrum { eigenvalues, n })
    }

    /// Eigenvalues, nonincreasing.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Sample size.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Dimension `p`.
    pub fn p(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Mean of the eigenvalues strictly below position `kprime`, i.e. of
    /// `d_{kprime+1}, ..., d_p` in 1-based terms. Requires `kprime < p`.
    pub fn dbar(&self, kprime: usize) -> Result<f64> {
        let p = self.eigenvalues.len();
        if kprime >= p {
            return Err(Error::index("kprime", kprime, format!("kprime < p = {p}")));
        }
        let tail = &self.eigenvalues[kprime..];
        Ok(tail.iter().sum::<f64>() / tail.len() as f64)
    }
}

/// Spectrum of the uncentered sample covariance of `x`: the composition of
/// [`sample_covariance`] and the symmetric eigensolver, tagged with `n`.
pub fn spectrum_of(x: &DataMatrix) -> Result<SampleSpectrum> {
    let values = eigen::eigvals_sym(&sample_covariance(x))?;
    SampleSpectrum::new(values, x.n)
}

/// Largest eigenvalue of `X'X / n` by power iteration on the implicit
/// operator `v -> X'(Xv)/n`, without forming the covariance matrix. Costs
/// `O(np)` per step instead of `O(p^3)` total, which is what makes the
/// larger convergence checks affordable.
pub fn top_sample_eigenvalue(x: &DataMatrix) -> Result<f64> {
    let (n, p) = (x.n, x.p);
    let mut v = vec![0.0; p];
    v[0] = 1.0;
    let mut xv = vec![0.0; n];
    let mut w = vec![0.0; p];
    let mut rho_prev = f64::NAN;
    for _ in 0..20_000 {
        for (i, out) in xv.iter_mut().enumerate() {
            *out = x.row(i).iter().zip(&v).map(|(a, b)| a * b).sum();
        }
        w.fill(0.0);
        for (i, &xi) in xv.iter().enumerate() {
            for (wj, &xij) in w.iter_mut().zip(x.row(i)) {
                *wj += xi * xij;
            }
        }
        let nf = n as f64;
        let rho: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / nf;
        let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        for (vj, &wj) in v.iter_mut().zip(&w) {
            *vj = wj / norm;
        }
        if rho_prev.is_finite() && (rho - rho_prev).abs() <= 1e-12 * rho.abs().max(1.0) {
            return Ok(rho);
        }
        rho_prev = rho;
    }
    Err(Error::Convergence(
        "power iteration for the top eigenvalue did not stabilize".into(),
    ))
}
