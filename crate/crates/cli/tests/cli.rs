use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sharpen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sharpen"))
        .args(args)
        .env_remove("SHARPEN_WORKERS")
        .output()
        .expect("spawn sharpen")
}

fn ok(args: &[&str]) -> String {
    let out = sharpen(args);
    assert!(
        out.status.success(),
        "sharpen {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |out: &Path| {
        vec![
            "run".to_string(),
            "--L".into(),
            "8".into(),
            "--p".into(),
            "0.1".into(),
            "--trajectories".into(),
            "20".into(),
            "--snapshots".into(),
            "3".into(),
            "--seed".into(),
            "1".into(),
            "--out".into(),
            path(out).into(),
        ]
    };
    let run = |out: &Path, workers: &str| {
        let mut v = args(out);
        v.extend(["--workers".to_string(), workers.to_string()]);
        ok(&v.iter().map(String::as_str).collect::<Vec<_>>());
    };
    run(a.path(), "1");
    let first = snapshot(a.path());
    let names: Vec<_> = first.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["run_L8_p0p1.csv", "run_L8_p0p1.json", "run_summary.json"]);
    run(b.path(), "4");
    assert_eq!(first, snapshot(b.path()));
    fs::remove_dir_all(a.path()).unwrap();
    run(a.path(), "2");
    assert_eq!(first, snapshot(a.path()));
}

#[test]
fn worker_count_can_come_from_the_environment() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, workers) in [(a.path(), "1"), (b.path(), "3")] {
        let out = Command::new(env!("CARGO_BIN_EXE_sharpen"))
            .args(["run", "--L", "6", "--p", "0.2", "--trajectories", "9", "--snapshots", "2", "--out", path(dir)])
            .env("SHARPEN_WORKERS", workers)
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    assert_eq!(snapshot(a.path()), snapshot(b.path()));

    let bad = Command::new(env!("CARGO_BIN_EXE_sharpen"))
        .args(["run", "--L", "6", "--p", "0.2", "--out", path(a.path())])
        .env("SHARPEN_WORKERS", "many")
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("SHARPEN_WORKERS"));
}

#[test]
fn rerun_skips_completed_points() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    ok(&["run", "--Ls", "6,8", "--p", "0.2", "--trajectories", "6", "--snapshots", "2", "--out", out]);
    let csv = dir.path().join("run_L6_p0p2.csv");
    let json = dir.path().join("run_L6_p0p2.json");
    // a completed point is not recomputed: its JSON is left as found
    let mut text = fs::read_to_string(&json).unwrap();
    text.push('\n');
    fs::write(&json, &text).unwrap();
    ok(&["run", "--Ls", "6,8", "--p", "0.2", "--trajectories", "6", "--snapshots", "2", "--out", out]);
    assert_eq!(fs::read_to_string(&json).unwrap(), text);
    // an interrupted point (no valid checksum) is recomputed
    let body = fs::read_to_string(&csv).unwrap();
    fs::write(&csv, &body[..body.len() - 20]).unwrap();
    ok(&["run", "--Ls", "6,8", "--p", "0.2", "--trajectories", "6", "--snapshots", "2", "--out", out]);
    assert_eq!(fs::read_to_string(&csv).unwrap(), body);
    assert_ne!(fs::read_to_string(&json).unwrap(), text);
}

#[test]
fn run_headers_carry_provenance() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "run", "--L", "6", "--p", "0.3", "--trajectories", "4", "--realizations", "2", "--burnIn", "6",
        "--snapshotEvery", "3", "--depth", "12", "--mode", "weak", "--gamma", "2", "--dt", "0.5", "--seed", "5",
        "--out", path(dir.path()),
    ]);
    let text = fs::read_to_string(dir.path().join("run_L6_p0p3.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# sharpen correlators csv"));
    assert_eq!(lines.next(), Some("# version = 1"));
    for needle in [
        "# L = 6", "# depth = 12", "# mode = weak", "# gamma = 2", "# dt = 0.5", "# seed = 5", "# realizations = 2",
        "# burnIn = 6", "# snapshotEvery = 3",
    ] {
        assert!(text.lines().any(|l| l == needle), "missing `{needle}`");
    }
    assert!(text.contains("\np,L,observable,x,estimate,stderr,nSamples\n"));
    assert!(text.lines().last().unwrap().starts_with("# sha256 = "));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.conf");
    let out = dir.path().join("out");
    fs::write(
        &cfg,
        format!(
            "# sweep\n[run]\nL = 6\npGrid = 0.1:0.2:0.1\ntrajectories = 4\nsnapshots = 2\nseed = 3\nout = {}\n",
            out.display()
        ),
    )
    .unwrap();
    ok(&["--config", path(&cfg), "run", "--seed", "4"]);
    let names: Vec<_> = snapshot(&out).into_iter().map(|(n, _)| n).collect();
    assert!(names.contains(&"run_L6_p0p1.csv".to_string()));
    assert!(names.contains(&"run_L6_p0p2.csv".to_string()));
    let text = fs::read_to_string(out.join("run_L6_p0p1.csv")).unwrap();
    assert!(text.lines().any(|l| l == "# seed = 4"), "command line overrides the config");
}

#[test]
fn fit_without_data_fails_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = sharpen(&["fit", "--inputs", path(dir.path()), "--out", path(dir.path())]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("no data"), "{err}");
}

#[test]
fn invalid_parameters_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["run", "--L", "7", "--p", "0.1"],
        vec!["run", "--L", "8", "--p", "1.5"],
        vec!["run", "--L", "8"],
        vec!["run", "--L", "8", "--p", "0.1", "--mode", "weak"],
        vec!["percolation", "--Ls", "8,16", "--pGrid", "0.5:0.2:0.1"],
        vec!["oracle", "--L", "8", "--depth", "2"],
    ] {
        let mut args = args.clone();
        args.extend(["--out", path(dir.path())]);
        let out = sharpen(&args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"), "{args:?}");
    }
}

#[test]
fn percolation_writes_wrap_table_and_collapse() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&[
        "percolation", "--Ls", "8,16,24", "--pGrid", "0.2:0.45:0.05", "--realizations", "60", "--seed", "2",
        "--out", path(dir.path()),
    ]);
    assert!(stdout.contains("collapse"));
    let names: Vec<_> = snapshot(dir.path()).into_iter().map(|(n, _)| n).collect();
    assert!(names.contains(&"wrap_charge_values.csv".to_string()));
    assert!(names.contains(&"collapse_charge_values.json".to_string()));
    assert!(names.contains(&"wrap_charge_values_L16_p0p3.csv".to_string()));
    let table = fs::read_to_string(dir.path().join("wrap_charge_values.csv")).unwrap();
    assert!(table.contains("\np,L,depth,P_wrap,stderr,nRealizations,rule\n"));
    assert_eq!(table.lines().filter(|l| !l.starts_with('#')).count(), 1 + 3 * 6);
}

#[test]
fn oracle_reports_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&["oracle", "--L", "4", "--depth", "2", "--p", "0.5", "--trajectories", "20000", "--out", path(dir.path())]);
    assert!(stdout.contains("E[<s0 s1>]"));
    let report: String = fs::read_to_string(dir.path().join("oracle.json")).unwrap();
    assert!(report.contains("\"branches\""));
    for line in stdout.lines().skip(1) {
        let z: f64 = line.rsplit("z = ").next().unwrap().trim().parse().unwrap();
        assert!(z < 4.0, "{line}");
    }
}

#[test]
fn hydro_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&["hydro", "--pGrid", "0.1:0.4:0.3", "--kPoints", "8", "--out", path(dir.path())]);
    let worst: f64 = stdout.rsplit(' ').next().unwrap().trim().parse().unwrap();
    assert!(worst < 1e-8, "{stdout}");
    assert!(dir.path().join("hydro.csv").is_file());
}

#[test]
fn run_can_dump_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["run", "--L", "6", "--p", "0.3", "--trajectories", "4", "--snapshots", "2", "--dump", "2", "--out", path(dir.path())]);
    let dumps: Vec<_> = snapshot(&dir.path().join("dumps")).into_iter().map(|(n, b)| (n, b[..8].to_vec())).collect();
    assert_eq!(dumps.len(), 2);
    assert_eq!(dumps[0].0, "traj_L6_p0p3_t0.bin");
    assert_eq!(dumps[0].1, b"SHRPTRJ\0");
}

mod fixtures {
    use std::f64::consts::PI;
    use std::path::Path;

    use sharpen_core::experiment::{FilterPoint, PointResult};
    use sharpen_core::io::write_json;
    use sharpen_core::observables::{CorrelatorSample, CorrelatorSet, ObservableAccumulator};

    /// Exact power laws: `C_z = -0.3 x^-alpha`, `C_W = x^(-2 pi rho)`,
    /// `Var_q = (8 rho / pi) ln(len) + 0.4`, identical in every batch.
    pub fn write(dir: &Path, sites: usize, p: f64, alpha: f64, rho: f64) {
        let half = sites / 2;
        let mut cz = vec![1.0];
        cz.extend((1..=half).map(|x| -0.3 * (x as f64).powf(-alpha)));
        let sample = CorrelatorSample {
            cz,
            cw: (1..=half).map(|x| (x as f64).powf(-2.0 * PI * rho)).collect(),
            var_q: (1..=half).map(|l| 8.0 * rho / PI * (l as f64).ln() + 0.4).collect(),
        };
        let mut correlators = CorrelatorSet::new(sites);
        let mut total_variance = ObservableAccumulator::new("VarQtotal", 1);
        for b in 0..8 {
            correlators.push(b, &sample);
            total_variance.push(b, &[0.5]);
        }
        let result = PointResult {
            point: FilterPoint::steady_state(sites, p, 8, 1, 0),
            correlators,
            snapshot_times: vec![4 * sites],
            total_variance,
        };
        write_json(&dir.join(format!("run_L{sites}_p{}.json", sharpen_core::io::tag(p))), &result).unwrap();
    }
}

#[test]
fn fit_recovers_synthetic_exponents() {
    use sharpen_core::io::ParsedCsv;

    let inputs = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let cases = [(0.05, 2.0, 0.5), (0.1, 1.5, 0.35), (0.2, 1.0, 0.2)];
    for (p, alpha, rho) in cases {
        fixtures::write(inputs.path(), 16, p, alpha, rho);
    }
    let stdout = ok(&["fit", "--inputs", path(inputs.path()), "--out", path(out.path()), "--window", "2:6"]);
    let table = ParsedCsv::read(&out.path().join("rho_s.csv")).unwrap();
    let col = |name: &str| table.column(name).unwrap();
    assert_eq!(table.rows.len(), 3);
    for (row, (p, alpha, rho)) in table.rows.iter().zip(cases) {
        let num = |name: &str| row[col(name)].parse::<f64>().unwrap();
        assert_eq!(num("p"), p);
        assert!((num("alpha") - alpha).abs() < 1e-9, "{row:?}");
        assert!((num("rhoVarQ") - rho).abs() < 1e-9, "{row:?}");
        assert!((num("rhoCW") - rho).abs() < 1e-9, "{row:?}");
    }
    // linear crossing of rho_s with 1/pi between p = 0.1 and 0.2
    let expected = 0.1 + (0.35 - 1.0 / std::f64::consts::PI) / (0.35 - 0.2) * 0.1;
    let line = stdout.lines().find(|l| l.contains("fromCW")).unwrap();
    let got: f64 = line.split(": ").nth(1).unwrap().split(' ').next().unwrap().parse().unwrap();
    assert!((got - expected).abs() < 1e-4, "{line} vs {expected}");
}
