use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn thiele(args: &[&str]) -> Output {
    thiele_with_env(args, &[])
}

fn thiele_with_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_thiele"));
    cmd.args(args).env_remove("THIELE_THREADS").env_remove("SOURCE_DATE_EPOCH");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes `text` as `name` in `dir` and returns its path.
fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn standard_with(field: &str, value: &str) -> String {
    let mut cfg: Value = serde_json::from_str(&std::fs::read_to_string(config("disability.json")).unwrap()).unwrap();
    cfg[field] = serde_json::from_str(value).unwrap();
    cfg.to_string()
}

#[test]
fn reserve_writes_the_figure_files_and_a_manifest() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("standard");
    let run = thiele(&["reserve", s(&config("disability.json")), "--out", s(&out)]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let files: Vec<&str> = manifest["files"].as_array().unwrap().iter().map(|f| f.as_str().unwrap()).collect();
    for name in ["active_reserve.csv", "disabled_onset_reserve.csv", "disabled_slices.csv"] {
        assert!(files.contains(&name), "{name} missing from {files:?}");
    }
    assert!(files.iter().all(|f| out.join(f).is_file()));
    assert_eq!(manifest["command"], "reserve");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);

    let summary = stdout_json(&run);
    let active = summary["reserves"][0]["value"].as_f64().unwrap();
    assert!(active > 0.4 && active < 0.43, "{active}");
}

#[test]
fn negative_step_exits_two_with_the_diagnostic() {
    let dir = TempDir::new().unwrap();
    let path = write_config(&dir, "bad.json", &standard_with("grid_step", "-0.08333333333333333"));
    let run = thiele(&["reserve", s(&path), "--out", s(&dir.path().join("out"))]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("grid_step must be positive"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn malformed_document_exits_two() {
    let dir = TempDir::new().unwrap();
    let path = write_config(&dir, "bad.json", "{\"schema\": 1, \"model_kind\": \"annuity\"}");
    assert_eq!(thiele(&["validate", s(&path)]).status.code(), Some(2));
    assert_eq!(thiele(&["validate", "/nonexistent/config.json"]).status.code(), Some(2));
}

#[test]
fn term_insurance_table_starts_at_the_boundary() {
    let dir = TempDir::new().unwrap();
    let run = thiele(&["reserve", s(&config("term_insurance.json")), "--out", s(dir.path())]);
    assert_eq!(run.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("reserves.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("time,state,value"));
    assert_eq!(lines.next(), Some("20.0,0,0.0"));
    let v0 = stdout_json(&run)["reserves"][0]["value"].as_f64().unwrap();
    assert!((v0 - 0.137668).abs() < 1e-3);
}

#[test]
fn one_path_runs_are_identical() {
    let dirs = [TempDir::new().unwrap(), TempDir::new().unwrap()];
    for d in &dirs {
        let run = thiele_with_env(
            &[
                "simulate",
                s(&config("disability.json")),
                "--paths",
                "1",
                "--seed",
                "42",
                "--out",
                s(d.path()),
                "--dump-paths",
            ],
            &[("SOURCE_DATE_EPOCH", "1700000000")],
        );
        assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    }
    let names = ["mc_estimate.json", "paths_0.csv", "paths_1.csv", "manifest.json"];
    for name in names {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
}

#[test]
fn zero_payments_estimate_zero() {
    let dir = TempDir::new().unwrap();
    let run = thiele(&["simulate", s(&config("zero_payments.json")), "--paths", "2000", "--out", s(dir.path())]);
    assert_eq!(run.status.code(), Some(0));
    let est: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("mc_estimate.json")).unwrap()).unwrap();
    assert_eq!(est["estimates"][0]["mean"].as_f64(), Some(0.0));
    assert_eq!(est["estimates"][0]["std_error"].as_f64(), Some(0.0));
}

#[test]
fn term_insurance_simulation_within_three_standard_errors() {
    let dir = TempDir::new().unwrap();
    let run = thiele(&["simulate", s(&config("term_insurance.json")), "--paths", "100000", "--out", s(dir.path())]);
    assert_eq!(run.status.code(), Some(0));
    let e = &stdout_json(&run)["estimates"][0];
    let (mean, se) = (e["mean"].as_f64().unwrap(), e["std_error"].as_f64().unwrap());
    assert!((mean - 0.137668).abs() < 3.0 * se, "{mean} ± {se}");
}

#[test]
fn compare_passes_on_term_insurance() {
    let run = thiele(&["compare", s(&config("term_insurance.json"))]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stdout));
    assert_eq!(stdout_json(&run)["pass"], true);
}

#[test]
fn compare_fails_when_simulated_rates_are_doubled() {
    let run = thiele(&["compare", s(&config("term_insurance.json")), "--perturb-mc-rates", "2"]);
    assert_eq!(run.status.code(), Some(1));
    assert_eq!(stdout_json(&run)["pass"], false);
}

#[test]
fn compare_passes_on_the_standard_contract() {
    let dir = TempDir::new().unwrap();
    let run = thiele(&["compare", s(&config("disability.json")), "--out", s(dir.path())]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stdout));
    let report = stdout_json(&run);
    let states: Vec<&str> =
        report["targets"].as_array().unwrap().iter().map(|t| t["state"].as_str().unwrap()).collect();
    assert_eq!(states, ["active", "disabled:30"]);
    assert!(dir.path().join("compare.json").is_file());
}

#[test]
fn compare_passes_on_the_spouse_contract() {
    let run = thiele(&["compare", s(&config("random_spouse.json"))]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stdout));
}

#[test]
fn long_horizon_validates_with_a_warning() {
    let dir = TempDir::new().unwrap();
    let path = write_config(&dir, "eighty.json", &standard_with("horizon_end", "80"));
    let run = thiele(&["validate", s(&path)]);
    assert_eq!(run.status.code(), Some(0));
    let report = stdout_json(&run);
    assert_eq!(report["valid"], true);
    assert_eq!(report["diagnostics"].as_array().unwrap().len(), 1);
    assert_eq!(report["diagnostics"][0]["severity"], "warning");
    assert!(String::from_utf8_lossy(&run.stderr).starts_with("warning:"));
}

#[test]
fn overflowing_rates_exit_three() {
    let dir = TempDir::new().unwrap();
    let text = r#"{
        "schema": 1, "model_kind": "discrete", "t_start": 0, "horizon_end": 5, "grid_step": 0.5,
        "interest": {"constant": 0.0},
        "discrete": {
            "n_states": 2,
            "transitions": [{"from": 0, "to": 1, "rate": {"constant": 1e300}}, {"from": 1, "to": 0, "rate": {"constant": 1e300}}],
            "payments": {"sojourn": [{"state": 1, "amount": 1.0}]}
        }
    }"#;
    let path = write_config(&dir, "overflow.json", text);
    let run = thiele(&["reserve", s(&path), "--out", s(&dir.path().join("out"))]);
    assert_eq!(run.status.code(), Some(3), "{}", String::from_utf8_lossy(&run.stderr));
}

#[test]
fn thread_cap_does_not_change_results() {
    let standard = config("disability.json");
    let args = ["compare", s(&standard), "--paths", "5000"];
    let free = thiele(&args);
    let capped = thiele_with_env(&args, &[("THIELE_THREADS", "1")]);
    assert_eq!(free.stdout, capped.stdout);
    let bad = thiele_with_env(&args, &[("THIELE_THREADS", "many")]);
    assert_eq!(bad.status.code(), Some(2));
}
