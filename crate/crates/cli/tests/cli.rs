use std::path::Path;
use std::process::{Command, Output};

use oukl_cli::report::canonicalize;

fn oukl(dir: &Path, config: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_oukl"))
        .arg("--config")
        .arg(&cfg)
        .args(extra)
        .env("OUKL_THREADS", "2")
        .output()
        .unwrap()
}

const ROTATION: &str = r#"{"seed": 11, "suite": "recurrence", "expect": "recurrent",
    "model": {"n": 2, "b": [[0, -1], [1, 0]]}}"#;

#[test]
fn rotation_is_recurrent_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let res = oukl(dir.path(), ROTATION, &["--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["details"]["verdict"], "recurrent");
    assert_eq!(report["pass"], true);
    assert!(report["timing"]["elapsed_seconds"].is_number());
    for rec in report["records"].as_array().unwrap() {
        assert!(!rec["anchor"].as_str().unwrap().is_empty());
    }
}

#[test]
fn non_square_drift_exits_two_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = r#"{"seed": 1, "suite": "recurrence", "model": {"n": 2, "b": [[0, -1], [1]]}}"#;
    let res = oukl(dir.path(), bad, &[]);
    assert_eq!(res.status.code(), Some(2));
    let diag: serde_json::Value = serde_json::from_slice(&res.stderr).unwrap();
    assert_eq!(diag["error"], "config");
    assert_eq!(diag["field"], "model.b");
}

#[test]
fn missing_seed_and_unknown_suite_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let no_seed = r#"{"suite": "recurrence", "model": {"n": 1, "b": [[0]]}}"#;
    assert_eq!(oukl(dir.path(), no_seed, &[]).status.code(), Some(2));
    assert_eq!(oukl(dir.path(), no_seed, &["--seed", "4"]).status.code(), Some(0));
    assert_eq!(oukl(dir.path(), ROTATION, &["--suite", "nope"]).status.code(), Some(2));
    assert_eq!(oukl(dir.path(), "{not json", &[]).status.code(), Some(2));
}

#[test]
fn failed_expectation_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let wrong = r#"{"seed": 1, "suite": "recurrence", "expect": "recurrent",
        "model": {"n": 3, "b": [[0, 0, 0], [0, 0, 0], [0, 0, 0]]}}"#;
    let res = oukl(dir.path(), wrong, &[]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn reports_are_canonically_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"seed": 5, "suite": "simulate",
        "model": {"n": 2, "b": [[0, -1], [1, 0]]},
        "monte_carlo": {"n_paths": 200, "step": 0.01, "horizon": 5},
        "simulate": {"x0": [2, 0], "ball": {"center": [0, 0], "radius": 1}, "horizons": [1, 2],
                     "path_horizon": 1, "occupation": false}}"#;
    let run = |threads: &str| {
        let out = dir.path().join(format!("r{threads}.json"));
        let cfg_path = dir.path().join("sim.json");
        std::fs::write(&cfg_path, cfg).unwrap();
        let res = Command::new(env!("CARGO_BIN_EXE_oukl"))
            .args(["--config", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .env("OUKL_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
        canonicalize(&std::fs::read_to_string(out).unwrap()).unwrap()
    };
    let a = run("1");
    assert_eq!(a, run("1"));
    assert_eq!(a, run("3"));
}

#[test]
fn liouville_csv_has_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rows.csv");
    let cfg = r#"{"seed": 2, "suite": "liouville", "model": {"n": 3, "b": [[0, -1, 0], [1, 0, 0], [0, 0, 0]]},
        "liouville": {"t_min": -30, "t_step": 1}}"#;
    let res = oukl(dir.path(), cfg, &["--csv", csv.to_str().unwrap(), "--out", dir.path().join("r.json").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let mut reader = csv::Reader::from_path(&csv).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["member", "x1", "x2", "x3", "t", "u", "gap"]);
    // two fixed and two rotating exponentials, five points, 31 times
    assert_eq!(reader.records().count(), 4 * 5 * 31);
}

#[test]
fn liouville_runs_without_a_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"seed": 2, "suite": "liouville", "model": {"n": 2, "b": [[0, -1], [1, 0]]}}"#;
    let res = oukl(dir.path(), cfg, &["--out", dir.path().join("r.json").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn simulate_writes_the_path_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("path.csv");
    let cfg = r#"{"seed": 3, "suite": "simulate", "model": {"n": 2, "b": [[0, 1], [0, 0]]},
        "simulate": {"path_step": 0.5, "path_horizon": 2}}"#;
    let res = oukl(dir.path(), cfg, &["--csv", csv.to_str().unwrap(), "--out", dir.path().join("r.json").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,x1,x2");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("0.0000000000000000e0,0.0000000000000000e0"));
}
