//! End-to-end tests through the compiled binary: output of `estimate` must
//! match the library computation exactly, exit codes must follow the
//! 0/1/2 contract, and `simulate` output files must parse back losslessly.

use std::path::Path;
use std::process::{Command, Output};

use spikecount::criteria::CriterionSpec;
use spikecount::io;
use spikecount::sim::run_sim;
use spikecount::spectra::{
    build_population, sample_covariance, sample_covariance_centered, sample_population,
    DataMatrix, NoiseKind, SampleSpectrum,
};
use spikecount::eigen;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spikecount"))
}

fn run_ok(args: &[&str]) -> String {
    let out = bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "expected success for {args:?}: stderr = {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf8 stdout")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal termination")
}

/// Extracts the value of a space-separated `key=value` token anywhere in
/// the output.
fn field(text: &str, key: &str) -> String {
    let prefix = format!("{key}=");
    text.split_whitespace()
        .find_map(|tok| tok.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no token {prefix}… in output:\n{text}"))
        .to_string()
}

/// Extracts the full-precision score vector printed after `scores=`.
fn scores(text: &str) -> Vec<f64> {
    let line = text
        .lines()
        .find(|l| l.starts_with("scores="))
        .unwrap_or_else(|| panic!("no scores line in output:\n{text}"));
    line["scores=".len()..]
        .split_whitespace()
        .map(|tok| tok.parse().expect("score parses"))
        .collect()
}

fn write_data_csv(path: &Path, x: &DataMatrix) {
    let mut text = String::new();
    for i in 0..x.n() {
        let row: Vec<String> = x.row(i).iter().map(|v| v.to_string()).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(path, text).expect("write data csv");
}

fn demo_data() -> DataMatrix {
    let pop = build_population(30, 3, 4.0).unwrap();
    sample_population(&pop, 90, NoiseKind::Gaussian, 2024).unwrap()
}

#[test]
fn estimate_from_data_matches_library_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.csv");
    let x = demo_data();
    write_data_csv(&path, &x);

    let text = run_ok(&[
        "estimate",
        "--data",
        path.to_str().unwrap(),
        "--criteria",
        "gic-fixed:bic",
        "--k-max",
        "8",
    ]);

    let spectrum =
        SampleSpectrum::new(eigen::eigvals_sym(&sample_covariance(&x)).unwrap(), x.n()).unwrap();
    let spec: CriterionSpec = "gic-fixed:bic".parse().unwrap();
    let expected = spec.evaluate(&spectrum, 8).unwrap();

    assert_eq!(field(&text, "criterion"), "gic-fixed:bic");
    assert_eq!(field(&text, "k_hat").parse::<usize>().unwrap(), expected.k_hat);
    // `{}` float formatting is shortest-round-trip, so parsed scores must be
    // bitwise equal to the library's.
    assert_eq!(scores(&text), expected.scores);
}

#[test]
fn estimate_centered_matches_library_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.csv");
    let x = demo_data();
    write_data_csv(&path, &x);

    let text = run_ok(&[
        "estimate",
        "--data",
        path.to_str().unwrap(),
        "--center",
        "--criteria",
        "gic-large:auto",
        "--k-max",
        "10",
    ]);

    let s = sample_covariance_centered(&x).unwrap();
    let spectrum = SampleSpectrum::new(eigen::eigvals_sym(&s).unwrap(), x.n()).unwrap();
    let spec: CriterionSpec = "gic-large:auto".parse().unwrap();
    let expected = spec.evaluate(&spectrum, 10).unwrap();

    assert_eq!(field(&text, "k_hat").parse::<usize>().unwrap(), expected.k_hat);
    assert_eq!(scores(&text), expected.scores);
    assert_eq!(
        field(&text, "multiplier").parse::<f64>().unwrap(),
        expected.multiplier.unwrap()
    );
}

#[test]
fn spectrum_file_bypasses_eigendecomposition() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    // An externally produced spectrum: no data matrix exists for it.
    let eigenvalues = vec![9.0, 4.5, 1.9, 1.3, 1.1, 0.9, 0.8, 0.6, 0.5, 0.4];
    let spectrum = SampleSpectrum::new(eigenvalues, 120).unwrap();
    io::write_spectrum_csv(&path, &spectrum).unwrap();

    let text = run_ok(&[
        "estimate",
        "--spectrum",
        path.to_str().unwrap(),
        "--criteria",
        "bcf",
        "--k-max",
        "5",
    ]);

    let spec: CriterionSpec = "bcf".parse().unwrap();
    let expected = spec.evaluate(&spectrum, 5).unwrap();
    assert_eq!(field(&text, "criterion"), "bcf");
    assert_eq!(field(&text, "k_hat").parse::<usize>().unwrap(), expected.k_hat);
    assert_eq!(field(&text, "multiplier"), "none");
    assert_eq!(scores(&text), expected.scores);
}

#[test]
fn all_ones_spectrum_selects_zero_spikes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ones.csv");
    let spectrum = SampleSpectrum::new(vec![1.0; 60], 100).unwrap();
    io::write_spectrum_csv(&path, &spectrum).unwrap();

    let text = run_ok(&[
        "estimate",
        "--spectrum",
        path.to_str().unwrap(),
        "--criteria",
        "gic-large:auto",
    ]);
    assert_eq!(field(&text, "k_hat"), "0");
    assert!(text.contains("no spikes selected"));
}

#[test]
fn default_criterion_tracks_problem_size() {
    let dir = tempfile::tempdir().unwrap();

    // min(n, p) >= 50: dimension-aware default.
    let large = dir.path().join("large.csv");
    io::write_spectrum_csv(&large, &SampleSpectrum::new(vec![1.0; 50], 80).unwrap()).unwrap();
    let text = run_ok(&["estimate", "--spectrum", large.to_str().unwrap()]);
    assert_eq!(field(&text, "criterion"), "gic-large:auto");

    // Small problem: fixed-dimension default.
    let small = dir.path().join("small.csv");
    io::write_spectrum_csv(&small, &SampleSpectrum::new(vec![1.0; 8], 100).unwrap()).unwrap();
    let text = run_ok(&["estimate", "--spectrum", small.to_str().unwrap()]);
    assert_eq!(field(&text, "criterion"), "gic-fixed:ilp");
}

#[test]
fn varphi_at_one_prints_known_value() {
    let text = run_ok(&["mp-eval", "varphi", "--c", "1"]);
    let value: f64 = text.trim().parse().unwrap();
    assert!((value - 0.8069).abs() < 5e-4, "varphi(1) printed {value}");
    assert!((value - (1.5 - std::f64::consts::LN_2)).abs() < 1e-15);
}

#[test]
fn exit_status_contract() {
    // 0: successful computation.
    let out = bin().args(["mp-eval", "psi", "--c", "0.4", "--lambda", "3"]).output().unwrap();
    assert_eq!(exit_code(&out), 0);

    // 1: verification that fails its tolerance (tiny budget on purpose).
    let out = bin()
        .args(["verify", "thm2", "--n", "500", "--reps", "10", "--seed", "2"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 1, "stdout: {}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));

    // 2: usage error (unknown flag, rejected by the parser).
    let out = bin().args(["estimate", "--bogus"]).output().unwrap();
    assert_eq!(exit_code(&out), 2);

    // 2: domain error with the offending quantity and bound on stderr.
    let out = bin().args(["mp-eval", "psi", "--c", "0.4", "--lambda", "1"]).output().unwrap();
    assert_eq!(exit_code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("lambda"), "stderr: {err}");

    // 2: unparseable criterion name.
    let out = bin()
        .args(["mp-eval", "cdf", "--c", "0.4"]) // missing --x
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2);

    // 2: missing input file names the path.
    let out = bin().args(["estimate", "--data", "/no/such/file.csv"]).output().unwrap();
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/file.csv"));
}

#[test]
fn verify_pass_exits_zero() {
    let out = bin()
        .args(["verify", "esd", "--c", "0.5", "--n", "400", "--seed", "3"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0, "stdout: {}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("=> pass"));
}

#[test]
fn simulate_writes_tables_that_parse_back_losslessly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    let out_path = dir.path().join("table.csv");
    let cfg_json = r#"[
        {"n": 100, "p": 30, "k": 2, "snr": 3.0,
         "criteria": ["gic-large:auto", "bcf"], "replications": 12, "seed": 5},
        {"n": 100, "p": 30, "k": 2, "snr": 5.0,
         "criteria": ["gic-large:auto", "bcf"], "replications": 12, "seed": 5}
    ]"#;
    std::fs::write(&cfg_path, cfg_json).unwrap();

    let text = run_ok(&[
        "simulate",
        "--config",
        cfg_path.to_str().unwrap(),
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert!(text.contains("wrote"));

    // The companion file reproduces the library's reports exactly.
    let configs = io::read_sim_config(&cfg_path).unwrap();
    let rows = io::read_table_full(io::companion_path(&out_path)).unwrap();
    assert_eq!(rows.len(), 4);
    for (i, cfg) in configs.iter().enumerate() {
        let report = run_sim(cfg).unwrap();
        for (j, summary) in report.criteria.iter().enumerate() {
            let row = &rows[2 * i + j];
            assert_eq!(row.criterion, summary.id);
            assert_eq!(row.success_rate, summary.success_rate);
            assert_eq!(row.mean_khat, summary.mean_khat);
            assert_eq!(row.khats, summary.khats);
            assert_eq!(row.n, cfg.n);
            assert_eq!(row.seed, cfg.seed);
        }
    }

    // The presentation file keeps the documented header shape.
    let main = std::fs::read_to_string(&out_path).unwrap();
    let header = main.lines().next().unwrap();
    assert_eq!(
        header,
        "n,p,k,snr,noise,replications,seed,\
         gic-large:auto rate,gic-large:auto mean,bcf rate,bcf mean"
    );
    assert_eq!(main.lines().count(), 3);
}
