use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_molchanov"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn linear_potential_diverges() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["check-molchanov", "--potential", "linear", "--d", "1", "--K", "100"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&dir.path().join("verdict.json"))["verdict"], "DivergesLikely");
    let profile = fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    assert_eq!(profile.lines().count(), 101);
    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["exit_code"], 0);
    assert_eq!(manifest["command"], "check-molchanov");
}

#[test]
fn constant_potential_is_a_negative_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["check-molchanov", "--potential", "constant", "--params", "1,0", "--d", "1", "--K", "50"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn bad_invocations_exit_64() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["spectrum", "--potential", "zero"])), 64);
    assert_eq!(code(&run(dir.path(), &["spectrum", "--potential", "nope", "--X", "1", "--N", "10"])), 64);
    assert_eq!(code(&run(dir.path(), &["spectrum", "--potential", "zero", "--X", "1", "--N", "10", "--bc", "robin:1"])), 64);
    assert_eq!(code(&run(dir.path(), &["cauchy", "--window-spec", "1:2"])), 64);
}

#[test]
fn free_operator_on_zero_pi_starts_at_one() {
    let dir = tempfile::tempdir().unwrap();
    let pi = std::f64::consts::PI.to_string();
    let o = run(dir.path(), &["spectrum", "--potential", "zero", "--X", &pi, "--N", "2000"]);
    assert_eq!(code(&o), 0);
    let rep = json(&dir.path().join("spectrum.json"));
    let first = &rep["eigenvalues"][0];
    let re = first["re"].as_f64().or_else(|| first[0].as_f64()).unwrap();
    assert!((re - 1.0).abs() < 1e-3, "λ1 = {re}");
}

#[test]
fn counterexample_schedule_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["counterexample", "--K", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let schedule = json(&dir.path().join("schedule.json"));
    let blocks = schedule["blocks"].as_array().unwrap();
    assert_eq!(blocks.len(), 3);
    for b in blocks {
        assert!(b["residual"].as_f64().unwrap() < 8192.0);
        assert!(b["n_k"].is_u64());
    }
    let again = tempfile::tempdir().unwrap();
    let o = run(again.path(), &["replay", dir.path().join("manifest.json").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    for name in ["schedule.json", "schedule.csv", "witness_1.csv", "witness_3.csv"] {
        assert_eq!(fs::read(dir.path().join(name)).unwrap(), fs::read(again.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn cauchy_writes_one_bump_per_window() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["--format", "csv", "cauchy", "--window-spec", "10:10:3", "--coeff", "linear"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 4);
    for k in 1..=3 {
        assert!(dir.path().join(format!("bump_{k}.csv")).is_file());
    }
}
