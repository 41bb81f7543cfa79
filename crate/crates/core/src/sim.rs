//! Deterministic Monte Carlo engine: table-style criterion comparisons and
//! empirical checks of the limiting behavior of the largest sample
//! eigenvalue and of the bulk spectrum.
//!
//! Replication `r` of a run draws every data row from the random stream
//! keyed by `(seed, r, row)`, so a report is a pure function of its
//! configuration no matter how many worker threads execute it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::CriterionSpec;
use crate::mp::MpLaw;
use crate::spectra::{
    self, build_population, sample_population_rep, sample_white_rep, snr_fixed_p, NoiseKind,
    SpikedPopulation,
};
use crate::{Error, Result};

fn default_noise() -> NoiseKind {
    NoiseKind::Gaussian
}

fn default_replications() -> usize {
    200
}

/// One Monte Carlo experiment: a spiked population, a noise model, and the
/// criteria to score on each replication's spectrum.
///
/// Exactly one of `snr` and `delta` must be set. `snr` gives the signal
/// floor directly; `delta` derives it through the sample-size-dependent
/// design `2 delta sqrt((p - k/2 + 1/2) lnln(n) / n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Sample size.
    pub n: usize,
    /// Dimension.
    pub p: usize,
    /// True number of spikes.
    pub k: usize,
    /// Explicit signal floor (smallest spike is `1 + snr`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr: Option<f64>,
    /// Distance from the detection boundary in the scaled design.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Noise distribution (default gaussian).
    #[serde(default = "default_noise")]
    pub noise: NoiseKind,
    /// Criterion identifiers, e.g. `"gic-large:auto"`; must be nonempty.
    pub criteria: Vec<String>,
    /// Monte Carlo replications (default 200).
    #[serde(default = "default_replications")]
    pub replications: usize,
    /// Master seed; replication `r` uses streams derived from `(seed, r)`.
    pub seed: u64,
    /// Largest candidate scored. Defaults to `p - 1` in the `delta` design
    /// and 15 otherwise, both clamped below `min(n, p)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
}

impl SimConfig {
    /// Signal floor implied by the configuration.
    pub fn resolved_snr(&self) -> Result<f64> {
        match (self.snr, self.delta) {
            (Some(s), None) => {
                if !(s.is_finite() && s > 0.0) {
                    return Err(Error::domain("snr", s, "snr > 0"));
                }
                Ok(s)
            }
            (None, Some(d)) => snr_fixed_p(d, self.p, self.k, self.n),
            (None, None) => Err(Error::Config("one of `snr` or `delta` is required".into())),
            (Some(_), Some(_)) => {
                Err(Error::Config("`snr` and `delta` are mutually exclusive".into()))
            }
        }
    }

    /// Candidate grid bound implied by the configuration.
    pub fn resolved_k_max(&self) -> Result<usize> {
        let cap = self.n.min(self.p);
        if let Some(k_max) = self.k_max {
            if k_max >= cap {
                return Err(Error::Config(format!(
                    "k_max = {k_max} must be below min(n, p) = {cap}"
                )));
            }
            return Ok(k_max);
        }
        let default = if self.delta.is_some() { self.p - 1 } else { 15 };
        Ok(default.min(cap - 1))
    }

    /// Parses the criterion identifier list.
    pub fn parsed_criteria(&self) -> Result<Vec<CriterionSpec>> {
        if self.criteria.is_empty() {
            return Err(Error::Config("criteria list must be nonempty".into()));
        }
        self.criteria.iter().map(|s| s.parse()).collect()
    }

    fn population(&self) -> Result<SpikedPopulation> {
        if self.k >= self.n.min(self.p) {
            return Err(Error::Config(format!(
                "k = {} must be below min(n, p) = {}",
                self.k,
                self.n.min(self.p)
            )));
        }
        build_population(self.p, self.k, self.resolved_snr()?)
    }

    fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.replications > u32::MAX as usize {
            return Err(Error::Config("replications must fit in 32 bits".into()));
        }
        self.resolved_k_max()?;
        self.parsed_criteria()?;
        self.population()?;
        Ok(())
    }
}

/// Aggregated outcome of one criterion across all replications.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionSummary {
    /// Criterion identifier as requested in the configuration.
    pub id: String,
    /// Fraction of replications with `k_hat == k`; exactly
    /// `hits / replications`.
    pub success_rate: f64,
    /// Arithmetic mean of the selected `k_hat` values.
    pub mean_khat: f64,
    /// Per-replication selections, in replication order, kept for auditing.
    pub khats: Vec<usize>,
}

/// Result of [`run_sim`]: the configuration echo plus one summary per
/// requested criterion, in request order.
#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    /// The configuration that produced this report.
    pub config: SimConfig,
    /// Resolved signal floor (identical to `config.snr` when explicit).
    pub snr: f64,
    /// Resolved candidate grid bound.
    pub k_max: usize,
    /// One summary per criterion.
    pub criteria: Vec<CriterionSummary>,
}

/// Runs the experiment: per replication, draw a sample, compute its
/// spectrum once, and score every criterion on that same spectrum.
/// Replications run in parallel; the report is bitwise identical for a
/// fixed configuration regardless of thread count. A criterion failure in
/// any replication aborts the run (reported with the smallest failing
/// replication index) rather than silently skipping draws.
pub fn run_sim(cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let pop = cfg.population()?;
    let specs = cfg.parsed_criteria()?;
    let k_max = cfg.resolved_k_max()?;
    let reps = cfg.replications;
    let per_rep: Vec<Result<Vec<usize>>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let data = sample_population_rep(&pop, cfg.n, cfg.noise, cfg.seed, r)?;
            let spectrum = spectra::spectrum_of(&data)?;
            specs
                .iter()
                .map(|spec| spec.evaluate(&spectrum, k_max).map(|res| res.k_hat))
                .collect()
        })
        .collect();
    let mut khats: Vec<Vec<usize>> = vec![Vec::with_capacity(reps); specs.len()];
    for (r, outcome) in per_rep.into_iter().enumerate() {
        match outcome {
            Ok(row) => {
                for (list, k_hat) in khats.iter_mut().zip(row) {
                    list.push(k_hat);
                }
            }
            Err(source) => {
                return Err(Error::Replication { rep: r, source: Box::new(source) })
            }
        }
    }
    let criteria = cfg
        .criteria
        .iter()
        .zip(khats)
        .map(|(id, list)| {
            let hits = list.iter().filter(|&&v| v == cfg.k).count();
            let sum: usize = list.iter().sum();
            CriterionSummary {
                id: id.clone(),
                success_rate: hits as f64 / reps as f64,
                mean_khat: sum as f64 / reps as f64,
                khats: list,
            }
        })
        .collect();
    Ok(SimReport { config: cfg.clone(), snr: cfg.resolved_snr()?, k_max, criteria })
}

/// One named pass/fail comparison inside a [`LimitCheckReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    /// What was measured.
    pub name: String,
    /// The measured value.
    pub observed: f64,
    /// Human-readable acceptance window.
    pub bound: String,
    /// Whether `observed` satisfies the window.
    pub pass: bool,
}

/// Outcome of an empirical limit check.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitCheckReport {
    /// Which limiting statement was exercised.
    pub target: String,
    /// Number of Monte Carlo draws behind the summary.
    pub samples: usize,
    /// Auxiliary quantities (theory values, per-point diagnostics).
    pub info: Vec<(String, f64)>,
    /// The pass/fail comparisons.
    pub checks: Vec<CheckLine>,
    /// Conjunction of all check lines.
    pub pass: bool,
}

impl LimitCheckReport {
    fn from_checks(
        target: String,
        samples: usize,
        info: Vec<(String, f64)>,
        checks: Vec<CheckLine>,
    ) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        LimitCheckReport { target, samples, info, checks, pass }
    }
}

impl std::fmt::Display for LimitCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{} ({} draws)", self.target, self.samples)?;
        for (name, value) in &self.info {
            writeln!(f, "  {name}: {value:.6}")?;
        }
        for c in &self.checks {
            writeln!(
                f,
                "  [{}] {}: observed {:.6}, want {}",
                if c.pass { "pass" } else { "FAIL" },
                c.name,
                c.observed,
                c.bound
            )?;
        }
        write!(f, "  => {}", if self.pass { "pass" } else { "FAIL" })
    }
}

fn round_dim(c: f64, n: usize) -> usize {
    (c * n as f64).round() as usize
}

/// Largest sample eigenvalues of `reps` spiked draws, one spike `lambda`,
/// replication `r` seeded from `(seed, r)`. Computed by power iteration so
/// large dimensions stay affordable.
fn top_eigenvalue_draws(
    lambda: f64,
    p: usize,
    n: usize,
    noise: NoiseKind,
    reps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let pop = SpikedPopulation::new(p, vec![lambda])?;
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let data = sample_population_rep(&pop, n, noise, seed, r)?;
            spectra::top_sample_eigenvalue(&data)
        })
        .collect()
}

/// Checks the almost-sure limit of the spike ratio: with one spike
/// `lambda`, the ratio `d_1 / psi(lambda)` should concentrate near 1.
/// Passes when the mean absolute deviation over replications stays below
/// 0.05 (a fixed regression threshold a few times the `1/sqrt(n)`
/// fluctuation scale at the sizes this is run at).
pub fn verify_limit_thm2(
    lambda: f64,
    target: MpLaw,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<LimitCheckReport> {
    if reps == 0 {
        return Err(Error::Config("reps must be at least 1".into()));
    }
    let psi = target.psi(lambda)?;
    let p = round_dim(target.c(), n);
    let tops = top_eigenvalue_draws(lambda, p, n, NoiseKind::Gaussian, reps, seed)?;
    let devs: Vec<f64> = tops.iter().map(|d1| (d1 / psi - 1.0).abs()).collect();
    let mean = devs.iter().sum::<f64>() / reps as f64;
    let max = devs.iter().fold(0.0f64, |m, &v| m.max(v));
    Ok(LimitCheckReport::from_checks(
        format!("spike ratio limit: d1/psi(lambda) -> 1 (lambda = {lambda}, c = {}, n = {n})", target.c()),
        reps,
        vec![
            ("psi(lambda)".into(), psi),
            ("max |d1/psi - 1|".into(), max),
        ],
        vec![CheckLine {
            name: "mean |d1/psi - 1|".into(),
            observed: mean,
            bound: "< 0.05".into(),
            pass: mean < 0.05,
        }],
    ))
}

/// Least-squares slope of `y` on `x`.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Checks the `1/sqrt(n)` error rate of the spike estimate: regresses the
/// log RMSE of `(d_1 - psi(lambda)) / lambda` on `log n` over a grid of
/// sample sizes (dimension `p = round(c n)` scales along). Passes when the
/// fitted exponent lies in `[-0.65, -0.35]`.
pub fn verify_rate_thm3(
    lambda: f64,
    c: f64,
    n_grid: &[usize],
    reps: usize,
    seed: u64,
) -> Result<LimitCheckReport> {
    if n_grid.len() < 4 {
        return Err(Error::Config(format!(
            "need at least 4 grid points, got {}",
            n_grid.len()
        )));
    }
    if reps == 0 {
        return Err(Error::Config("reps must be at least 1".into()));
    }
    let law = MpLaw::new(c)?;
    let psi = law.psi(lambda)?; // also validates distance from the bulk
    let mut info = Vec::new();
    let mut log_n = Vec::with_capacity(n_grid.len());
    let mut log_rmse = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let p = round_dim(c, n);
        let tops = top_eigenvalue_draws(lambda, p, n, NoiseKind::Gaussian, reps, seed)?;
        let mse = tops
            .iter()
            .map(|d1| {
                let e = (d1 - psi) / lambda;
                e * e
            })
            .sum::<f64>()
            / reps as f64;
        let rmse = mse.sqrt();
        info.push((format!("rmse at n = {n}"), rmse));
        log_n.push((n as f64).ln());
        log_rmse.push(rmse.ln());
    }
    let s = slope(&log_n, &log_rmse);
    Ok(LimitCheckReport::from_checks(
        format!("spike error rate: (d1 - psi)/lambda ~ n^(-1/2) (lambda = {lambda}, c = {c})"),
        reps * n_grid.len(),
        info,
        vec![CheckLine {
            name: "log-log rate exponent".into(),
            observed: s,
            bound: "in [-0.65, -0.35]".into(),
            pass: (-0.65..=-0.35).contains(&s),
        }],
    ))
}

/// Limiting variance of `sqrt(n) (d_1 - psi(lambda)) / lambda` for a
/// coordinate spike under noise with fourth moment `nu4`:
/// `2 psi'(lambda) + (nu4 - 3) psi'(lambda)^2` with
/// `psi'(lambda) = 1 - c/(lambda-1)^2`. For Gaussian noise (`nu4 = 3`)
/// this is the published `2 - 2c/(lambda-1)^2`.
fn scaled_spike_variance(law: MpLaw, lambda: f64, nu4: f64) -> Result<f64> {
    let gaussian = law.limit_variance(lambda)?;
    let dpsi = gaussian / 2.0; // psi'(lambda)
    Ok(gaussian + (nu4 - 3.0) * dpsi * dpsi)
}

/// Checks the central limit of the spike: collects
/// `z_r = sqrt(n) (d_1 - psi(lambda)) / lambda` and compares the empirical
/// mean with 0 and the empirical variance with its noise-appropriate
/// limit. Passes when `|mean| < 3 sigma / sqrt(reps)` and the variance is
/// within 15% of theory.
pub fn verify_normality_thm4(
    lambda: f64,
    c: f64,
    n: usize,
    reps: usize,
    noise: NoiseKind,
    seed: u64,
) -> Result<LimitCheckReport> {
    if reps < 2 {
        return Err(Error::Config("reps must be at least 2".into()));
    }
    let law = MpLaw::new(c)?;
    let psi = law.psi(lambda)?;
    let sigma2 = scaled_spike_variance(law, lambda, noise.fourth_moment())?;
    if sigma2 <= 0.0 {
        return Err(Error::domain(
            "limiting variance",
            sigma2,
            "positive (lambda on the detection boundary has none)",
        ));
    }
    let p = round_dim(c, n);
    let tops = top_eigenvalue_draws(lambda, p, n, noise, reps, seed)?;
    let sqrt_n = (n as f64).sqrt();
    let z: Vec<f64> = tops.iter().map(|d1| sqrt_n * (d1 - psi) / lambda).collect();
    let mean = z.iter().sum::<f64>() / reps as f64;
    let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (reps - 1) as f64;
    let mean_bound = 3.0 * sigma2.sqrt() / (reps as f64).sqrt();
    let ratio = var / sigma2;
    Ok(LimitCheckReport::from_checks(
        format!(
            "spike central limit: sqrt(n)(d1 - psi)/lambda (lambda = {lambda}, c = {c}, \
             noise = {noise})"
        ),
        reps,
        vec![
            ("theory variance".into(), sigma2),
            ("observed variance".into(), var),
            ("variance ratio".into(), ratio),
        ],
        vec![
            CheckLine {
                name: "empirical mean".into(),
                observed: mean,
                bound: format!("|mean| < {mean_bound:.6}"),
                pass: mean.abs() < mean_bound,
            },
            CheckLine {
                name: "variance / theory".into(),
                observed: ratio,
                bound: "within 15% of 1".into(),
                pass: (ratio - 1.0).abs() <= 0.15,
            },
        ],
    ))
}

/// Checks convergence of the empirical spectral distribution of a
/// spike-free sample to its limit law: sup-distance over a 1000-point grid
/// below `5 / sqrt(p)`, the smallest nonzero eigenvalue near the lower
/// bulk edge, and exactly `p - n` structural zeros when `p > n`.
pub fn verify_esd(c: f64, n: usize, seed: u64) -> Result<LimitCheckReport> {
    let law = MpLaw::new(c)?;
    let p = round_dim(c, n);
    let data = sample_white_rep(n, p, NoiseKind::Gaussian, seed, 0)?;
    let spectrum = spectra::spectrum_of(&data)?;
    let d = spectrum.eigenvalues();
    // Empirical CDF with the right-continuous convention (counts d_i <= x),
    // matching the limit law's atom at 0 when c > 1; evaluated on an
    // even grid over [0, upper edge + 0.5].
    let hi = law.upper_edge() + 0.5;
    let grid_len = 1000usize;
    let mut sup = 0.0f64;
    // d is nonincreasing: d_i <= x iff i is past the first such index.
    let mut asc: Vec<f64> = d.to_vec();
    asc.reverse();
    for j in 0..grid_len {
        let x = hi * j as f64 / (grid_len - 1) as f64;
        let count = asc.partition_point(|&v| v <= x);
        let fn_x = count as f64 / p as f64;
        let fc_x = law.cdf(x);
        sup = sup.max((fn_x - fc_x).abs());
    }
    let zeros = d.iter().filter(|&&v| v == 0.0).count();
    let expected_zeros = p.saturating_sub(n);
    let d_min_nonzero = asc[zeros];
    let a = law.lower_edge();
    let sup_bound = 5.0 / (p as f64).sqrt();
    let edge_err = (d_min_nonzero - a).abs();
    Ok(LimitCheckReport::from_checks(
        format!("bulk spectrum limit (c = {c}, n = {n}, p = {p})"),
        p,
        vec![
            ("largest eigenvalue".into(), d[0]),
            ("upper edge".into(), law.upper_edge()),
            ("smallest nonzero eigenvalue".into(), d_min_nonzero),
            ("lower edge".into(), a),
        ],
        vec![
            CheckLine {
                name: "sup |F_n - F_c|".into(),
                observed: sup,
                bound: format!("< {sup_bound:.6}"),
                pass: sup < sup_bound,
            },
            CheckLine {
                name: "lower-edge error |d_min - a|".into(),
                observed: edge_err,
                bound: "< 0.1".into(),
                pass: edge_err < 0.1,
            },
            CheckLine {
                name: "structural zero count".into(),
                observed: zeros as f64,
                bound: format!("== max(0, p - n) = {expected_zeros}"),
                pass: zeros == expected_zeros,
            },
        ],
    ))
}
