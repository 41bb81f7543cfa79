//! Command-line front end: estimate the number of spiked eigenvalues from
//! data or a precomputed spectrum, run Monte Carlo experiments from JSON
//! configs, evaluate bulk-law quantities, and run the empirical checks of
//! the limiting theory.
//!
//! Exit status: 0 on success, 1 when a `verify` check fails, 2 on usage or
//! domain errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spikecount::criteria::{default_gamma, CriterionResult, CriterionSpec};
use spikecount::io;
use spikecount::mp::{varphi, MpLaw};
use spikecount::sim::{
    run_sim, verify_esd, verify_limit_thm2, verify_normality_thm4, verify_rate_thm3,
    LimitCheckReport,
};
use spikecount::spectra::{
    sample_covariance, sample_covariance_centered, NoiseKind, SampleSpectrum,
};
use spikecount::{eigen, Error};

#[derive(Parser)]
#[command(
    name = "spikecount",
    version,
    about = "Estimate the number of spiked eigenvalues of a covariance matrix"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the spike count from a data matrix or a spectrum file.
    Estimate(EstimateArgs),
    /// Run Monte Carlo experiments described by a JSON config file.
    Simulate(SimulateArgs),
    /// Evaluate a quantity of the limiting spectral law.
    MpEval(MpEvalArgs),
    /// Run an empirical check of the limiting theory; exits 1 on failure.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct EstimateArgs {
    /// Headerless CSV data matrix (rows = observations).
    #[arg(long, required_unless_present = "spectrum", conflicts_with = "spectrum")]
    data: Option<PathBuf>,
    /// Spectrum CSV with `n=`/`p=` header lines (skips eigendecomposition).
    #[arg(long)]
    spectrum: Option<PathBuf>,
    /// Criteria to score, comma separated (default: gic-large:auto when
    /// min(n, p) >= 50, else gic-fixed:ilp).
    #[arg(long, value_delimiter = ',')]
    criteria: Vec<String>,
    /// Largest candidate to score.
    #[arg(long)]
    k_max: Option<usize>,
    /// Center columns and use the n-1 divisor (data input only).
    #[arg(long, conflicts_with = "spectrum")]
    center: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON file holding one experiment config or an array of them.
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path; a full-precision companion `<stem>_full.csv` is
    /// written next to it.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct MpEvalArgs {
    /// Quantity to evaluate.
    quantity: Quantity,
    /// Aspect ratio p/n.
    #[arg(long)]
    c: f64,
    /// Evaluation point on the eigenvalue axis (density, cdf).
    #[arg(long)]
    x: Option<f64>,
    /// Population spike (psi, limit-variance, gap).
    #[arg(long)]
    lambda: Option<f64>,
    /// Sample-eigenvalue location (psi-inv, m1, m2).
    #[arg(long)]
    d: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Quantity {
    /// Bulk density at x.
    Density,
    /// Bulk distribution function at x.
    Cdf,
    /// Spike-forward map psi(lambda).
    Psi,
    /// Spike-backward map psi^{-1}(d).
    PsiInv,
    /// First companion transform m1(d).
    M1,
    /// Second companion transform m2(d).
    M2,
    /// Consistency threshold varphi(c).
    Varphi,
    /// Limiting variance of the scaled spike fluctuation.
    LimitVariance,
    /// Consistency gap margins at the smallest spike.
    Gap,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(subcommand)]
    target: VerifyTarget,
}

#[derive(Subcommand)]
enum VerifyTarget {
    /// Almost-sure spike ratio limit d1/psi(lambda) -> 1.
    Thm2 {
        #[arg(long, default_value_t = 5.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0.4)]
        c: f64,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 50)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// n^{-1/2} error rate of the spike estimate (log-log regression).
    Thm3 {
        #[arg(long, default_value_t = 5.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0.5)]
        c: f64,
        /// Grid of sample sizes, comma separated (at least 4).
        #[arg(long, value_delimiter = ',', default_values_t = [500, 1000, 2000, 4000])]
        n_grid: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Central limit of sqrt(n)(d1 - psi)/lambda: mean 0, known variance.
    Thm4 {
        #[arg(long, default_value_t = 3.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0.4)]
        c: f64,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 2000)]
        reps: usize,
        #[arg(long, default_value = "gaussian")]
        noise: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Bulk spectrum convergence of a spike-free sample.
    Esd {
        #[arg(long, default_value_t = 0.5)]
        c: f64,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    // Die silently on a closed pipe (`spikecount … | head`) instead of
    // panicking: restore the default SIGPIPE disposition Rust overrides.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> spikecount::Result<ExitCode> {
    match command {
        Command::Estimate(args) => estimate(args).map(|()| ExitCode::SUCCESS),
        Command::Simulate(args) => simulate(args).map(|()| ExitCode::SUCCESS),
        Command::MpEval(args) => mp_eval(args).map(|()| ExitCode::SUCCESS),
        Command::Verify(args) => {
            let report = verify(args.target)?;
            println!("{report}");
            Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn load_spectrum(args: &EstimateArgs) -> spikecount::Result<SampleSpectrum> {
    if let Some(path) = &args.spectrum {
        return io::read_spectrum_csv(path);
    }
    let path = args.data.as_ref().expect("clap enforces data xor spectrum");
    let x = io::read_data_csv(path)?;
    let s = if args.center { sample_covariance_centered(&x)? } else { sample_covariance(&x) };
    SampleSpectrum::new(eigen::eigvals_sym(&s)?, x.n())
}

/// Default criteria and grid bound for an estimate on an `(n, p)` spectrum:
/// the dimension-aware criterion once both sizes are moderately large, the
/// iterated-logarithm fixed-dimension criterion otherwise.
fn estimate_defaults(n: usize, p: usize, bcf_requested: bool) -> (Vec<String>, usize) {
    let cap = n.min(p) - 1;
    let (criteria, base) = if n.min(p) >= 50 {
        (vec!["gic-large:auto".to_string()], 15)
    } else {
        (vec!["gic-fixed:ilp".to_string()], cap)
    };
    let mut k_max = base.min(cap);
    if bcf_requested {
        k_max = k_max.min((n.saturating_sub(2)).min(p.saturating_sub(1)).saturating_sub(1));
    }
    (criteria, k_max)
}

fn estimate(args: EstimateArgs) -> spikecount::Result<()> {
    let spectrum = load_spectrum(&args)?;
    let (n, p) = (spectrum.n(), spectrum.p());
    let bcf_requested = args.criteria.iter().any(|s| s == "bcf");
    let (default_criteria, default_k_max) = estimate_defaults(n, p, bcf_requested);
    let criteria = if args.criteria.is_empty() { default_criteria } else { args.criteria.clone() };
    let k_max = args.k_max.unwrap_or(default_k_max);

    let c = p as f64 / n as f64;
    println!("n={n} p={p} c={c}");
    println!("phi={} gamma_default={}", varphi(c)?, default_gamma(n, p));
    for id in &criteria {
        let spec: CriterionSpec = id.parse()?;
        let result = spec.evaluate(&spectrum, k_max)?;
        print_criterion(&result);
        print_diagnostics(&spectrum, &result)?;
    }
    Ok(())
}

fn print_criterion(result: &CriterionResult) {
    println!("criterion={} k_hat={}", result.id, result.k_hat);
    match result.multiplier {
        Some(m) => println!("multiplier={m}"),
        None => println!("multiplier=none"),
    }
    let scores =
        result.scores.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ");
    println!("scores={scores}");
}

/// Spike-side diagnostics for a selection: how far the last kept eigenvalue
/// stands above the bulk, the implied population spike, and the
/// consistency gap margins at that spike.
fn print_diagnostics(
    spectrum: &SampleSpectrum,
    result: &CriterionResult,
) -> spikecount::Result<()> {
    let k_hat = result.k_hat;
    if k_hat == 0 {
        println!("diagnostics: no spikes selected");
        return Ok(());
    }
    let c = spectrum.p() as f64 / spectrum.n() as f64;
    let law = MpLaw::new(c)?;
    let d_k = spectrum.eigenvalues()[k_hat - 1];
    let edge = law.upper_edge();
    println!("d_khat={d_k} bulk_edge={edge}");
    let d_next = spectrum.eigenvalues()[k_hat];
    println!("gap_over_dbar={}", (d_k - d_next) / spectrum.dbar(k_hat)?);
    if d_k <= edge {
        println!(
            "warning: d_khat does not exceed the bulk edge; the selected spike \
             is indistinguishable from bulk noise"
        );
        return Ok(());
    }
    let lambda_hat = law.psi_inv(d_k)?;
    println!("lambda_hat={lambda_hat} snr_hat={}", lambda_hat - 1.0);
    match law.gap_margin(lambda_hat) {
        Ok(gap) => println!(
            "gap: aic={} quasi_aic={} kappa={}",
            gap.aic_gap, gap.quasi_aic_gap, gap.kappa
        ),
        Err(_) => println!(
            "gap: not available (implied spike sits at the detection boundary)"
        ),
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> spikecount::Result<()> {
    let configs = io::read_sim_config(&args.config)?;
    let mut reports = Vec::with_capacity(configs.len());
    for cfg in &configs {
        let report = run_sim(cfg)?;
        let cells = report
            .criteria
            .iter()
            .map(|s| format!("{} rate={:.2} mean={:.2}", s.id, s.success_rate, s.mean_khat))
            .collect::<Vec<_>>()
            .join(" | ");
        println!(
            "n={} p={} k={} snr={} noise={}: {cells}",
            cfg.n, cfg.p, cfg.k, report.snr, cfg.noise
        );
        reports.push(report);
    }
    io::write_table(&args.output, &reports)?;
    println!(
        "wrote {} and {}",
        args.output.display(),
        io::companion_path(&args.output).display()
    );
    Ok(())
}

fn mp_eval(args: MpEvalArgs) -> spikecount::Result<()> {
    let need = |value: Option<f64>, flag: &str| {
        value.ok_or_else(|| Error::Config(format!("--{flag} is required for this quantity")))
    };
    match args.quantity {
        Quantity::Varphi => println!("{}", varphi(args.c)?),
        Quantity::Density => {
            let law = MpLaw::new(args.c)?;
            println!("{}", law.density(need(args.x, "x")?));
        }
        Quantity::Cdf => {
            let law = MpLaw::new(args.c)?;
            println!("{}", law.cdf(need(args.x, "x")?));
        }
        Quantity::Psi => {
            let law = MpLaw::new(args.c)?;
            println!("{}", law.psi(need(args.lambda, "lambda")?)?);
        }
        Quantity::PsiInv => {
            let law = MpLaw::new(args.c)?;
            println!("{}", law.psi_inv(need(args.d, "d")?)?);
        }
        Quantity::M1 => {
            let law = MpLaw::new(args.c)?;
            println!("{}", law.m1(need(args.d, "d")?)?);
        }
        Quantity::M2 => {
            let law = MpLaw::new(args.c)?;
            println!("{}", law.m2(need(args.d, "d")?)?);
        }
        Quantity::LimitVariance => {
            let law = MpLaw::new(args.c)?;
            println!("{}", law.limit_variance(need(args.lambda, "lambda")?)?);
        }
        Quantity::Gap => {
            let law = MpLaw::new(args.c)?;
            let gap = law.gap_margin(need(args.lambda, "lambda")?)?;
            println!("aic_gap={}", gap.aic_gap);
            println!("quasi_aic_gap={}", gap.quasi_aic_gap);
            println!("kappa={}", gap.kappa);
        }
    }
    Ok(())
}

fn verify(target: VerifyTarget) -> spikecount::Result<LimitCheckReport> {
    match target {
        VerifyTarget::Thm2 { lambda, c, n, reps, seed } => {
            verify_limit_thm2(lambda, MpLaw::new(c)?, n, reps, seed)
        }
        VerifyTarget::Thm3 { lambda, c, n_grid, reps, seed } => {
            verify_rate_thm3(lambda, c, &n_grid, reps, seed)
        }
        VerifyTarget::Thm4 { lambda, c, n, reps, noise, seed } => {
            let kind: NoiseKind = noise.parse()?;
            verify_normality_thm4(lambda, c, n, reps, kind, seed)
        }
        VerifyTarget::Esd { c, n, seed } => verify_esd(c, n, seed),
    }
}
