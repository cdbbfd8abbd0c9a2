use std::path::PathBuf;
use std::process::{Command, Output};

use surveykit::catalog::VerificationReport;
use surveykit::estimators::FamilyConfig;
use surveykit::population::{compute_moments, finite_factors, load_population};
use surveykit::theory::{mse_mean, theory_t1, theory_t2, TheoryInput};
use surveykit_cli::commands::{MembersReport, APPENDIX_GRID};

fn root() -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", ".."].iter().collect()
}

fn fixture(name: &str) -> String {
    root().join("fixtures").join(name).to_string_lossy().into_owned()
}

fn surveykit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surveykit"))
        .args(args)
        .env_remove("SURVEYKIT_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Compares with `tests/golden/<name>`; `UPDATE_GOLDEN=1` rewrites the file.
fn check_golden(name: &str, actual: &str) {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "golden", name].iter().collect();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "output differs from {}", path.display());
}

#[test]
fn params_on_small_fixture() {
    let o = surveykit(&["params", "--pop", &fixture("small3.csv"), "--n", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("| K_x | 0.75 |"));
    assert!(!out.contains("f2") && !out.contains("f3"));
    check_golden("params_small3.md", &out);

    let o = surveykit(&["params", "--pop", &fixture("small3.csv"), "--n", "2", "--n-prime", "3", "--format", "csv"]);
    let out = stdout(&o);
    assert!(out.contains("\nf2,0\n") && out.contains("\nf3,0.166667\n"), "{out}");
}

#[test]
fn missing_file_is_an_io_error() {
    let o = surveykit(&["params", "--pop", "no/such/pop.csv", "--n", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no/such/pop.csv"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(surveykit(&["params"]).status.code(), Some(1));
    assert_eq!(surveykit(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(surveykit(&["params", "--pop", &fixture("pop8.csv"), "--n", "zero"]).status.code(), Some(1));
    let o = surveykit(&["verify", "--pop", &fixture("pop8.csv"), "--n", "3", "--mode", "mc"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("SURVEYKIT_SEED"));
    let o = surveykit(&["members", "--pop", &fixture("pop8.csv"), "--n", "3", "--k1-atoms", "unity", "--k3-atoms", "zero"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(surveykit(&["--help"]).status.success());
}

fn members_report(args: &[&str]) -> MembersReport {
    let mut all = vec!["members", "--format", "json"];
    all.extend_from_slice(args);
    let o = surveykit(&all);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn members_cells_match_theory_module() {
    let path = fixture("pop24.csv");
    let pop = load_population(std::fs::File::open(&path).unwrap()).unwrap();
    let m = compute_moments(&pop).unwrap();
    let f = finite_factors(24, 4, None).unwrap();
    let base = mse_mean(&m, &f);

    let report = members_report(&["--pop", &path, "--n", "4", "--alpha", "1,-1"]);
    assert_eq!(report.rows.len(), 2 * APPENDIX_GRID.len());
    for row in &report.rows {
        for cell in &row.cells {
            let cfg = FamilyConfig {
                k1: row.k_scale.resolve(&m, &f),
                k2: cell.k2.unwrap(),
                k3: row.k_shift.resolve(&m, &f),
                alpha: row.alpha.unwrap(),
                ..FamilyConfig::default()
            };
            let direct = 100.0 * base / theory_t1(&TheoryInput::new(m, f, cfg).unwrap()).mse;
            assert!((cell.pre.unwrap() - direct).abs() <= 1e-12 * direct);
        }
    }

    let report = members_report(&["--pop", &path, "--n", "4", "--family", "t2"]);
    assert_eq!(report.rows.len(), APPENDIX_GRID.len());
    for row in &report.rows {
        let cfg = FamilyConfig {
            k4: row.k_scale.resolve(&m, &f),
            k5: row.k_shift.resolve(&m, &f),
            beta: -1.0,
            lambda: -1.0,
            ..FamilyConfig::default()
        };
        let direct = 100.0 * base / theory_t2(&TheoryInput::new(m, f, cfg).unwrap()).mse;
        assert!((row.cells[0].pre.unwrap() - direct).abs() <= 1e-12 * direct);
    }
}

#[test]
fn zero_alpha_gives_pre_100_and_degenerate_cells_are_flagged() {
    let path = fixture("pop24.csv");
    let report = members_report(&["--pop", &path, "--n", "4", "--alpha", "0"]);
    for cell in report.rows.iter().flat_map(|r| &r.cells) {
        assert!((cell.pre.unwrap() - 100.0).abs() < 1e-12);
    }
    let o = surveykit(&[
        "members", "--pop", &path, "--n", "4", "--k1-atoms", "unity", "--k3-atoms", "Xbar,C_x", "--format", "csv",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let line = out.lines().find(|l| l.starts_with("1,unity,Xbar,")).unwrap();
    assert!(line.ends_with(",n/a(degenerate)"), "{line}");
    assert_eq!(out.lines().count(), 3);
}

#[test]
fn members_golden_tables() {
    let path = fixture("pop24.csv");
    for (name, extra) in [
        ("members_t1_ratio_pop24.md", vec!["--alpha", "1"]),
        ("members_t1_product_pop24.md", vec!["--alpha", "-1"]),
        ("members_t2_pop24.md", vec!["--family", "t2"]),
    ] {
        let mut args = vec!["members", "--pop", &path, "--n", "4"];
        args.extend(extra);
        let o = surveykit(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        check_golden(name, &stdout(&o));
    }
}

#[test]
fn weights_hand_fixture_and_degenerate_cases() {
    let o = surveykit(&["weights", "--pop", &fixture("small3.csv"), "--n", "2", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("w0,0.25\nw1,0.5625\nw2,0.1875\n"), "{out}");

    let flat = root().join("target").join("rho0.csv");
    std::fs::write(&flat, "y,x\n1,1\n2,2\n2,3\n1,4\n").unwrap();
    let o = surveykit(&["weights", "--pop", flat.to_str().unwrap(), "--n", "2", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let w: Vec<f64> = serde_json::from_value(v["weights"].clone()).unwrap();
    assert!((w[0] - 1.0).abs() < 1e-12 && w[1].abs() < 1e-12 && w[2].abs() < 1e-12, "{w:?}");

    let o = surveykit(&[
        "weights", "--pop", &fixture("pop12.csv"), "--n", "3", "--n-prime", "6", "--m", "0", "--q", "0.5", "--gamma", "1",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("singular"));

    let o = surveykit(&["weights", "--pop", &fixture("pop24.csv"), "--n", "4", "--beta", "-1"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn verify_rows_and_exit_codes() {
    let o = surveykit(&["verify", "--pop", &fixture("pop24.csv"), "--n", "4", "--format", "json"]);
    let report: VerificationReport = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report.rows.len(), 5);
    assert_eq!(report.rows[0].estimator, "mean");
    assert!(report.rows[0].truth_bias.abs() < 1e-12);
    assert_eq!(o.status.code() == Some(4), !report.pass);
    assert!(report.pass);

    let o = surveykit(&["verify", "--pop", &fixture("pop24.csv"), "--n", "4", "--tol-bias", "0", "--tol-mse", "0", "--format", "json"]);
    assert_eq!(o.status.code(), Some(4));
    let report: VerificationReport = serde_json::from_slice(&o.stdout).unwrap();
    assert!(report.rows[0].pass);
    assert!(report.rows[1..].iter().all(|r| !r.pass));
}

#[test]
fn verify_golden_csv() {
    let o = surveykit(&["verify", "--pop", &fixture("pop24.csv"), "--n", "4", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    check_golden("verify_pop24_n4.csv", &stdout(&o));
}

#[test]
fn monte_carlo_json_is_reproducible_and_round_trips() {
    let args = [
        "verify", "--pop", &fixture("pop10.csv"), "--n", "3", "--mode", "mc", "--reps", "20000", "--format", "json",
    ];
    let a = Command::new(env!("CARGO_BIN_EXE_surveykit"))
        .args(args)
        .env("SURVEYKIT_SEED", "77")
        .env("RAYON_NUM_THREADS", "1")
        .output()
        .unwrap();
    let b = Command::new(env!("CARGO_BIN_EXE_surveykit"))
        .args(args)
        .arg("--seed")
        .arg("77")
        .env("RAYON_NUM_THREADS", "4")
        .output()
        .unwrap();
    assert!(a.status.code() == Some(0) || a.status.code() == Some(4));
    assert_eq!(a.stdout, b.stdout);

    let report: VerificationReport = serde_json::from_slice(&a.stdout).unwrap();
    let again = serde_json::to_string_pretty(&report).unwrap() + "\n";
    assert_eq!(again.as_bytes(), a.stdout.as_slice());
    let back: VerificationReport = serde_json::from_str(&again).unwrap();
    assert_eq!(back, report);
}

#[test]
fn two_phase_verify() {
    let o = surveykit(&["verify", "--pop", &fixture("pop12.csv"), "--n", "3", "--n-prime", "6", "--gamma", "1", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: VerificationReport = serde_json::from_slice(&o.stdout).unwrap();
    let names: Vec<&str> = report.rows.iter().map(|r| r.estimator.as_str()).collect();
    assert_eq!(names, ["mean", "t1d", "t2d", "tpd"]);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::copy(fixture("pop24.csv"), dir.path().join("pop.csv")).unwrap();
    std::fs::write(
        &cfg,
        r#"{"pop": "pop.csv", "n": 4, "k1": "unity", "k2": -1, "k3": "C_x", "alpha": 1.0, "format": "json"}"#,
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let o = surveykit(&["weights", "--config", cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["n"], 4);
    assert_eq!(v["config"]["k2"], -1);

    let o = surveykit(&["weights", "--config", cfg, "--n", "6", "--k2", "+1", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("quantity,value\n"));
    let o = surveykit(&["weights", "--config", cfg, "--n", "6", "--k2", "+1"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["n"], 6);
    assert_eq!(v["config"]["k2"], 1);

    std::fs::write(dir.path().join("bad.json"), r#"{"n": 4, "bogus": 1}"#).unwrap();
    let o = surveykit(&["weights", "--config", dir.path().join("bad.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn generate_writes_a_loadable_population() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("syn.csv");
    let spec = r#"{"N": 30, "target_rho": 0.8, "mean_y": 50, "mean_x": 20, "cv_y": 0.3, "cv_x": 0.25, "seed": 4}"#;
    let o = surveykit(&["generate", "--synthetic", spec, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let pop = load_population(std::fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(pop.len(), 30);

    let again = surveykit(&["generate", "--synthetic", spec]);
    assert_eq!(again.stdout, std::fs::read(&out).unwrap());

    let bad = surveykit(&["generate", "--synthetic", r#"{"N": 30, "target_rho": 1.5, "mean_y": 1, "mean_x": 1, "cv_y": 0.1, "cv_x": 0.1, "seed": 1}"#]);
    assert_eq!(bad.status.code(), Some(1));
}
