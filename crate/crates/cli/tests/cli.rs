use std::path::Path;
use std::process::{Command, Output};

fn chaoslab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chaoslab"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

const SMALL: [&str; 8] = ["--set", "d=6", "--set", "trials=2", "--set", "n_test=300", "--set", "psi_grid=[0.5,1.5]"];

#[test]
fn selftest_passes_and_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = chaoslab(&["selftest", "--out", "st"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("PASS iota_isometry")));
    assert!(!stdout.contains("FAIL"));
    for f in ["results.csv", "config.resolved.json", "diagnostics.json"] {
        assert!(tmp.path().join("st").join(f).exists(), "{f}");
    }
}

#[test]
fn unknown_experiment_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = chaoslab(&["no_such_experiment"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_overrides_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    for set in ["trials=0", "no_such_key=1", "d=-3", "solver.tol"] {
        let out = chaoslab(&["lossgrid", "--set", set], tmp.path());
        assert_eq!(out.status.code(), Some(2), "{set}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn malformed_config_file_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.json"), "{ d: ").unwrap();
    let out = chaoslab(&["phase", "--config", "bad.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let out = chaoslab(&["phase", "--config", "missing.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn results_are_reproducible_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |threads: &str, dir: &str| {
        let mut args = vec!["lossgrid", "--threads", threads, "--seed", "7", "--out", dir];
        args.extend(SMALL);
        let out = chaoslab(&args, tmp.path());
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(tmp.path().join(dir).join("results.csv")).unwrap()
    };
    let a = run("1", "a");
    let b = run("2", "b");
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.lines().skip(1).all(|l| l.contains(",7,")));
}

#[test]
fn config_file_and_overrides_compose() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.json"), r#"{"d": 7, "trials": 1, "psi_grid": [1.0]}"#).unwrap();
    let out = chaoslab(&["descent", "--config", "c.json", "--set", "d=5", "--set", "n_test=300", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let resolved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("o/config.resolved.json")).unwrap()).unwrap();
    assert_eq!(resolved["d"], 5);
    assert_eq!(resolved["trials"], 1);
    assert_eq!(resolved["psi_grid"], serde_json::json!([1.0]));
}

#[test]
fn diagnose_reports_spectra() {
    let tmp = tempfile::tempdir().unwrap();
    let out = chaoslab(&["diagnose", "--set", "d=10", "--out", "dg"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let diag: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("dg/diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["within_caps"], true);
    let csv = std::fs::read_to_string(tmp.path().join("dg/results.csv")).unwrap();
    assert!(csv.contains("v2_centered_op"));
}
