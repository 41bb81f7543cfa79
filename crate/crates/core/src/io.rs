//! File formats: headerless data CSV, spectrum CSV with an `n=`/`p=`
//! header, JSON experiment configs, and the two-file table output
//! (rounded presentation CSV plus a full-precision companion that parses
//! back losslessly).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::sim::{SimConfig, SimReport};
use crate::spectra::{DataMatrix, NoiseKind, SampleSpectrum};
use crate::{Error, Result};

/// `fs::read_to_string` with the path prepended to the error message, so a
/// missing-file report names the file it was looking for.
fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

/// Reads a headerless CSV data matrix: rows are observations, columns are
/// variables, `.` as the decimal separator. Blank lines are ignored.
pub fn read_data_csv(path: impl AsRef<Path>) -> Result<DataMatrix> {
    let path = path.as_ref();
    let text = read_file(path)?;
    let mut values = Vec::new();
    let mut n = 0usize;
    let mut p = None;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut this_row = 0usize;
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Parse(format!(
                    "{}:{}: invalid number {:?}",
                    path.display(),
                    idx + 1,
                    field.trim()
                ))
            })?;
            values.push(v);
            this_row += 1;
        }
        match p {
            None => p = Some(this_row),
            Some(cols) if cols != this_row => {
                return Err(Error::Parse(format!(
                    "{}:{}: expected {} columns, found {}",
                    path.display(),
                    idx + 1,
                    cols,
                    this_row
                )))
            }
            Some(_) => {}
        }
        n += 1;
    }
    let p = p.ok_or_else(|| Error::Parse(format!("{}: no data rows", path.display())))?;
    DataMatrix::new(n, p, values)
}

/// Reads a spectrum file: two header lines `n=<n>` and `p=<p>`, then one
/// eigenvalue per line.
pub fn read_spectrum_csv(path: impl AsRef<Path>) -> Result<SampleSpectrum> {
    let path = path.as_ref();
    let text = read_file(path)?;
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let n = parse_header(path, lines.next(), "n")?;
    let p = parse_header(path, lines.next(), "p")?;
    let mut values = Vec::with_capacity(p);
    for line in lines {
        let v: f64 = line.parse().map_err(|_| {
            Error::Parse(format!("{}: invalid eigenvalue {:?}", path.display(), line))
        })?;
        values.push(v);
    }
    if values.len() != p {
        return Err(Error::Parse(format!(
            "{}: header says p={} but found {} eigenvalues",
            path.display(),
            p,
            values.len()
        )));
    }
    SampleSpectrum::new(values, n)
}

fn parse_header(path: &Path, line: Option<&str>, key: &str) -> Result<usize> {
    let line = line.ok_or_else(|| {
        Error::Parse(format!("{}: missing `{key}=<count>` header line", path.display()))
    })?;
    let rest = line.strip_prefix(key).and_then(|r| r.trim_start().strip_prefix('=')).ok_or_else(
        || {
            Error::Parse(format!(
                "{}: expected `{key}=<count>` header, found {line:?}",
                path.display()
            ))
        },
    )?;
    rest.trim().parse().map_err(|_| {
        Error::Parse(format!("{}: invalid count in header {line:?}", path.display()))
    })
}

/// Writes a spectrum with its `n=`/`p=` header at full precision (the
/// shortest decimal form that parses back to the same float).
pub fn write_spectrum_csv(path: impl AsRef<Path>, spectrum: &SampleSpectrum) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "n={}", spectrum.n());
    let _ = writeln!(out, "p={}", spectrum.p());
    for v in spectrum.eigenvalues() {
        let _ = writeln!(out, "{v}");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads one or more experiment configurations from a JSON file holding
/// either a single object or an array of objects.
pub fn read_sim_config(path: impl AsRef<Path>) -> Result<Vec<SimConfig>> {
    let path = path.as_ref();
    let text = read_file(path)?;
    let trimmed = text.trim_start();
    let parsed = if trimmed.starts_with('[') {
        serde_json::from_str::<Vec<SimConfig>>(&text)
    } else {
        serde_json::from_str::<SimConfig>(&text).map(|cfg| vec![cfg])
    };
    parsed.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// One criterion of one experiment in the long-format companion file.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    /// Sample size.
    pub n: usize,
    /// Dimension.
    pub p: usize,
    /// True number of spikes.
    pub k: usize,
    /// Resolved signal floor.
    pub snr: f64,
    /// Noise distribution.
    pub noise: NoiseKind,
    /// Replication count.
    pub replications: usize,
    /// Master seed.
    pub seed: u64,
    /// Candidate grid bound.
    pub k_max: usize,
    /// Criterion identifier.
    pub criterion: String,
    /// Fraction of replications selecting the true `k`.
    pub success_rate: f64,
    /// Mean selected candidate.
    pub mean_khat: f64,
    /// Per-replication selections.
    pub khats: Vec<usize>,
}

/// Flattens a report into its long-format rows, one per criterion.
pub fn table_rows(report: &SimReport) -> Vec<TableRow> {
    report
        .criteria
        .iter()
        .map(|summary| TableRow {
            n: report.config.n,
            p: report.config.p,
            k: report.config.k,
            snr: report.snr,
            noise: report.config.noise,
            replications: report.config.replications,
            seed: report.config.seed,
            k_max: report.k_max,
            criterion: summary.id.clone(),
            success_rate: summary.success_rate,
            mean_khat: summary.mean_khat,
            khats: summary.khats.clone(),
        })
        .collect()
}

/// Path of the full-precision companion: `<stem>_full.<ext>` next to the
/// presentation file.
pub fn companion_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("table");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_full.{ext}"),
        None => format!("{stem}_full"),
    };
    path.with_file_name(name)
}

/// Writes the table layout shared by the experiment reports: one row per
/// report, one `rate`/`mean` column pair per criterion, rounded to two
/// decimals for reading; and the companion file with every quantity at
/// full precision (including the audited per-replication selections).
///
/// All reports must request the same criteria in the same order.
pub fn write_table(path: impl AsRef<Path>, reports: &[SimReport]) -> Result<()> {
    let path = path.as_ref();
    if reports.is_empty() {
        return Err(Error::Config("no reports to write".into()));
    }
    let ids: Vec<&str> = reports[0].criteria.iter().map(|c| c.id.as_str()).collect();
    if ids.is_empty() {
        return Err(Error::Config("reports carry no criteria".into()));
    }
    for r in reports {
        let here: Vec<&str> = r.criteria.iter().map(|c| c.id.as_str()).collect();
        if here != ids {
            return Err(Error::Config(format!(
                "reports disagree on criteria: {ids:?} vs {here:?}"
            )));
        }
    }

    let mut main = String::from("n,p,k,snr,noise,replications,seed");
    for id in &ids {
        let _ = write!(main, ",{id} rate,{id} mean");
    }
    main.push('\n');
    for r in reports {
        let c = &r.config;
        let _ = write!(
            main,
            "{},{},{},{},{},{},{}",
            c.n, c.p, c.k, r.snr, c.noise, c.replications, c.seed
        );
        for summary in &r.criteria {
            let _ = write!(main, ",{:.2},{:.2}", summary.success_rate, summary.mean_khat);
        }
        main.push('\n');
    }
    fs::write(path, main)?;

    let mut full = String::from(
        "n,p,k,snr,noise,replications,seed,k_max,criterion,success_rate,mean_khat,khats\n",
    );
    for r in reports {
        for row in table_rows(r) {
            let khats =
                row.khats.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
            let _ = writeln!(
                full,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                row.n,
                row.p,
                row.k,
                row.snr,
                row.noise,
                row.replications,
                row.seed,
                row.k_max,
                row.criterion,
                row.success_rate,
                row.mean_khat,
                khats
            );
        }
    }
    fs::write(companion_path(path), full)?;
    Ok(())
}

/// Parses a full-precision companion file back into its rows.
pub fn read_table_full(path: impl AsRef<Path>) -> Result<Vec<TableRow>> {
    let path = path.as_ref();
    let text = read_file(path)?;
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, l)| l).unwrap_or("");
    let expected =
        "n,p,k,snr,noise,replications,seed,k_max,criterion,success_rate,mean_khat,khats";
    if header.trim() != expected {
        return Err(Error::Parse(format!(
            "{}: unexpected header {header:?}",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(Error::Parse(format!(
                "{}:{}: expected 12 fields, found {}",
                path.display(),
                idx + 1,
                fields.len()
            )));
        }
        let ctx = |what: &str| {
            Error::Parse(format!("{}:{}: invalid {what}", path.display(), idx + 1))
        };
        let khats = fields[11]
            .split_whitespace()
            .map(|v| v.parse::<usize>().map_err(|_| ctx("khat entry")))
            .collect::<Result<Vec<_>>>()?;
        rows.push(TableRow {
            n: fields[0].parse().map_err(|_| ctx("n"))?,
            p: fields[1].parse().map_err(|_| ctx("p"))?,
            k: fields[2].parse().map_err(|_| ctx("k"))?,
            snr: fields[3].parse().map_err(|_| ctx("snr"))?,
            noise: fields[4].parse()?,
            replications: fields[5].parse().map_err(|_| ctx("replications"))?,
            seed: fields[6].parse().map_err(|_| ctx("seed"))?,
            k_max: fields[7].parse().map_err(|_| ctx("k_max"))?,
            criterion: fields[8].to_string(),
            success_rate: fields[9].parse().map_err(|_| ctx("success_rate"))?,
            mean_khat: fields[10].parse().map_err(|_| ctx("mean_khat"))?,
            khats,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::run_sim;

    fn temp_path(name: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        (dir, path)
    }

    #[test]
    fn data_csv_reads_shape_and_values() {
        let (_dir, path) = temp_path("x.csv");
        fs::write(&path, "1.0, 2.0, 3.0\n4.0,5.0,6.0\n\n").unwrap();
        let x = read_data_csv(&path).unwrap();
        assert_eq!((x.n(), x.p()), (2, 3));
        assert_eq!(x.row(1), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn data_csv_rejects_ragged_and_junk_input() {
        let (_dir, path) = temp_path("bad.csv");
        fs::write(&path, "1,2\n3\n").unwrap();
        assert!(read_data_csv(&path).is_err());
        fs::write(&path, "1,oops\n").unwrap();
        assert!(read_data_csv(&path).is_err());
        fs::write(&path, "").unwrap();
        assert!(read_data_csv(&path).is_err());
        assert!(read_data_csv("/nonexistent/x.csv").is_err());
    }

    #[test]
    fn spectrum_round_trips_at_full_precision() {
        let spectrum = SampleSpectrum::new(
            vec![std::f64::consts::PI, 1.0 / 3.0, 1e-17, 0.0],
            7,
        )
        .unwrap();
        let (_dir, path) = temp_path("s.csv");
        write_spectrum_csv(&path, &spectrum).unwrap();
        let back = read_spectrum_csv(&path).unwrap();
        assert_eq!(back, spectrum);
    }

    #[test]
    fn spectrum_header_is_validated() {
        let (_dir, path) = temp_path("s.csv");
        fs::write(&path, "p=2\nn=5\n1.0\n0.5\n").unwrap();
        assert!(read_spectrum_csv(&path).is_err()); // headers swapped
        fs::write(&path, "n=5\np=3\n1.0\n0.5\n").unwrap();
        assert!(read_spectrum_csv(&path).is_err()); // count mismatch
        fs::write(&path, "n=5\np=2\n1.0\n0.5\n").unwrap();
        assert!(read_spectrum_csv(&path).is_ok());
    }

    #[test]
    fn config_file_accepts_object_or_array() {
        let (_dir, path) = temp_path("cfg.json");
        fs::write(
            &path,
            r#"{"n": 50, "p": 10, "k": 1, "snr": 2.0, "criteria": ["bcf"], "seed": 3}"#,
        )
        .unwrap();
        let cfgs = read_sim_config(&path).unwrap();
        assert_eq!(cfgs.len(), 1);
        fs::write(
            &path,
            r#"[{"n": 50, "p": 10, "k": 1, "snr": 2.0, "criteria": ["bcf"], "seed": 3},
               {"n": 60, "p": 10, "k": 1, "snr": 2.5, "criteria": ["bcf"], "seed": 4}]"#,
        )
        .unwrap();
        let cfgs = read_sim_config(&path).unwrap();
        assert_eq!(cfgs.len(), 2);
        assert_eq!(cfgs[1].n, 60);
        fs::write(&path, "{").unwrap();
        assert!(read_sim_config(&path).is_err());
    }

    #[test]
    fn table_round_trips_through_the_companion_file() {
        let base = SimConfig {
            n: 60,
            p: 15,
            k: 2,
            snr: Some(2.0),
            delta: None,
            noise: NoiseKind::Gaussian,
            criteria: vec!["gic-large:auto".into(), "bcf".into()],
            replications: 8,
            seed: 42,
            k_max: Some(5),
        };
        let mut second = base.clone();
        second.snr = Some(3.0);
        let reports = vec![run_sim(&base).unwrap(), run_sim(&second).unwrap()];
        let (_dir, path) = temp_path("table.csv");
        write_table(&path, &reports).unwrap();

        // Presentation file: header plus one row per report, 2dp cells.
        let main = fs::read_to_string(&path).unwrap();
        let mut lines = main.lines();
        assert_eq!(
            lines.next().unwrap(),
            "n,p,k,snr,noise,replications,seed,\
             gic-large:auto rate,gic-large:auto mean,bcf rate,bcf mean"
        );
        let first = lines.next().unwrap();
        assert!(first.starts_with("60,15,2,2,gaussian,8,42,"), "{first}");

        // Companion file: lossless.
        let rows = read_table_full(companion_path(&path)).unwrap();
        let expected: Vec<TableRow> =
            reports.iter().flat_map(table_rows).collect();
        assert_eq!(rows, expected);
    }

    #[test]
    fn table_requires_consistent_criteria() {
        let a = SimConfig {
            n: 50,
            p: 10,
            k: 1,
            snr: Some(2.0),
            delta: None,
            noise: NoiseKind::Gaussian,
            criteria: vec!["bcf".into()],
            replications: 4,
            seed: 1,
            k_max: Some(4),
        };
        let mut b = a.clone();
        b.criteria = vec!["gic-large:auto".into()];
        let reports = vec![run_sim(&a).unwrap(), run_sim(&b).unwrap()];
        let (_dir, path) = temp_path("t.csv");
        assert!(matches!(write_table(&path, &reports), Err(Error::Config(_))));
        assert!(matches!(write_table(&path, &[]), Err(Error::Config(_))));
    }

    #[test]
    fn companion_path_forms() {
        assert_eq!(
            companion_path(Path::new("/tmp/out/table2.csv")),
            Path::new("/tmp/out/table2_full.csv")
        );
        assert_eq!(companion_path(Path::new("results")), Path::new("results_full"));
    }
}
