//! End-to-end checks of the `airmax` binary: exit codes, artifacts and the
//! determinism contract.

use std::path::Path;
use std::process::{Command, Output};

fn airmax(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_airmax"))
        .args(args)
        .current_dir(dir)
        .env_remove("AIRMAX_SEED")
        .output()
        .expect("binary runs")
}

fn write_scenario(dir: &Path, name: &str, seed: u64) -> std::path::PathBuf {
    let path = dir.join(name);
    let text = format!(
        r#"{{
            "version": 1,
            "topology": {{"random": {{"n": 8, "density": 0.3, "seed": 4}}}},
            "x0": "random",
            "channel": {{"kind": "rayleigh", "scale": 1.0}},
            "protocol": "ftc",
            "seed": {seed}
        }}"#
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn validate_accepts_well_formed_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    write_scenario(dir.path(), "ok.json", 1);
    let out = airmax(&["validate", "ok.json"], dir.path());
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}

#[test]
fn validate_rejects_schema_violations_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"version": 1, "x0": [1.0]}"#).unwrap();
    let out = airmax(&["validate", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn unreadable_file_and_unknown_flag_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = airmax(&["run", "missing.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let out = airmax(&["run", "--bogus-flag"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let out = airmax(&["no-such-command"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_prints_summary_json_by_default() {
    let dir = tempfile::tempdir().unwrap();
    write_scenario(dir.path(), "s.json", 3);
    let out = airmax(&["run", "s.json"], dir.path());
    assert!(out.status.success());
    let summary: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("summary is JSON");
    assert_eq!(summary["converged"], serde_json::Value::Bool(true));
    assert!(summary["iterations"].as_u64().unwrap() > 0);
}

#[test]
fn run_writes_requested_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    write_scenario(dir.path(), "s.json", 3);
    let out = airmax(
        &["run", "s.json", "--trace", "t.csv", "--summary", "sum.json"],
        dir.path(),
    );
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let trace = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(trace.starts_with("k,agent,x,y,t_window,u,v_lyapunov\n"));
    let summary = std::fs::read_to_string(dir.path().join("sum.json")).unwrap();
    assert!(summary.contains("\"converged\": true"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    write_scenario(dir.path(), "s.json", 9);
    airmax(&["run", "s.json", "--trace", "a.csv"], dir.path());
    airmax(&["run", "s.json", "--trace", "b.csv"], dir.path());
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn seed_env_var_overrides_scenario_seed() {
    let dir = tempfile::tempdir().unwrap();
    write_scenario(dir.path(), "s.json", 9);
    let baseline = airmax(&["run", "s.json"], dir.path());
    let overridden = Command::new(env!("CARGO_BIN_EXE_airmax"))
        .args(["run", "s.json"])
        .current_dir(dir.path())
        .env("AIRMAX_SEED", "12345")
        .output()
        .unwrap();
    assert!(overridden.status.success());
    assert_ne!(baseline.stdout, overridden.stdout);

    let bad = Command::new(env!("CARGO_BIN_EXE_airmax"))
        .args(["run", "s.json"])
        .current_dir(dir.path())
        .env("AIRMAX_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn batch_processes_every_scenario_in_the_directory() {
    let dir = tempfile::tempdir().unwrap();
    write_scenario(dir.path(), "one.json", 1);
    write_scenario(dir.path(), "two.json", 2);
    let out = airmax(&["batch", "."], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for stem in ["one", "two"] {
        assert!(dir.path().join(format!("{stem}.trace.csv")).exists());
        assert!(dir.path().join(format!("{stem}.summary.json")).exists());
    }
    let empty = tempfile::tempdir().unwrap();
    let out = airmax(&["batch", "."], empty.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn batch_is_rerunnable_and_reproducible() {
    // A second batch run must ignore the summaries the first one wrote and
    // regenerate identical artifacts.
    let dir = tempfile::tempdir().unwrap();
    write_scenario(dir.path(), "s.json", 5);
    assert!(airmax(&["batch", "."], dir.path()).status.success());
    let first = std::fs::read(dir.path().join("s.trace.csv")).unwrap();
    let rerun = airmax(&["batch", "."], dir.path());
    assert!(rerun.status.success(), "{}", String::from_utf8_lossy(&rerun.stderr));
    let second = std::fs::read(dir.path().join("s.trace.csv")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn compare_tdma_is_deterministic_and_parseable() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "compare-tdma",
        "--n-min",
        "3",
        "--n-max",
        "8",
        "--trials",
        "5",
        "--seed",
        "1",
    ];
    let first = airmax(&args, dir.path());
    assert!(first.status.success());
    let second = airmax(&args, dir.path());
    assert_eq!(first.stdout, second.stdout);
    let text = String::from_utf8(first.stdout).unwrap();
    assert!(text.starts_with("n,trial,k_t_slots,k_b_slots,ratio\n"));
    assert_eq!(text.lines().count(), 1 + 6 * 5);
}

#[test]
fn demo_nomographic_emits_the_error_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = airmax(&["demo-nomographic", "--out", "demo.csv"], dir.path());
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("demo.csv")).unwrap();
    assert!(text.starts_with("p,abs_error\n"));
    assert_eq!(text.lines().count(), 1 + 6);

    let lse = airmax(&["demo-nomographic", "--which", "log-sum-exp"], dir.path());
    assert!(lse.status.success());
    assert!(String::from_utf8_lossy(&lse.stdout).starts_with("p,abs_error\n"));
}
