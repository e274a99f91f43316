use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bnls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bnls")).args(args).output().expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn groundstate_presets_report_the_critical_power() {
    let dir = tempfile::tempdir().unwrap();
    for (preset, p_cr) in [("gs-1d", 2.9868), ("gs-2d", 13.143)] {
        let out_dir = dir.path().join(preset);
        let out = bnls(&["groundstate", "--preset", preset, "--out-dir", path_str(&out_dir)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let meta = json(&out_dir.join("ground_state.json"));
        let power = meta["power"].as_f64().unwrap();
        assert!((power / p_cr - 1.0).abs() < 1e-3, "{preset}: {power}");
        assert_eq!(meta["critical"], true);
        let manifest = json(&out_dir.join("manifest.json"));
        assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
    }
}

#[test]
fn seeded_positivity_check_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut seen = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let out = bnls(&["groundstate", "--preset", "gs-1d", "--out-dir", path_str(&out_dir), "--seed", "11"]);
        assert!(out.status.success());
        let check = json(&out_dir.join("gn_check.json"));
        assert_eq!(check["all_hold"], true);
        assert_eq!(check["fields"], 50);
        seen.push(check);
    }
    assert_eq!(seen[0], seen[1]);
}

#[test]
fn invalid_sigma_is_rejected_before_computing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "dim = 1\nsigma = -2.0\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = bnls(&["groundstate", "--config", path_str(&cfg), "--out-dir", path_str(&out_dir)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.join("ground_state.dat").exists());
}

#[test]
fn missing_source_is_a_usage_error() {
    let out = bnls(&["simulate", "--out-dir", "/nonexistent"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analyze_without_a_run_fails_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = bnls(&["analyze", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("analysis").exists());
}

const SHORT_RUN: &str = r#"
name = "short"
dim = 1
sigma = 6.0
r_max = 60.0
nodes = 1201
dt0 = 3.6e-5
l_stop = 2e-3

[initial]
kind = "gaussian"
amplitude = 1.6
exponent = 2.0
"#;

#[test]
fn simulate_then_analyze_is_deterministic_and_checksummed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.toml");
    fs::write(&cfg, SHORT_RUN).unwrap();
    let run = dir.path().join("run");
    let out = bnls(&["simulate", "--config", path_str(&cfg), "--out-dir", path_str(&run)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let manifest = json(&run.join("manifest.json"));
    assert_eq!(manifest["halt"], "target_reached");
    assert_eq!(manifest["config"]["name"], "short");
    for f in manifest["outputs"].as_array().unwrap() {
        assert!(run.join(f["path"].as_str().unwrap()).exists());
    }
    assert!(!manifest["archive"].as_array().unwrap().is_empty());

    let first = bnls(&["analyze", path_str(&run)]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let report_a = fs::read(run.join("analysis/report.json")).unwrap();
    let table_a = fs::read(run.join("analysis/amplitude.csv")).unwrap();
    let second = bnls(&["analyze", path_str(&run)]);
    assert!(second.status.success());
    assert_eq!(report_a, fs::read(run.join("analysis/report.json")).unwrap());
    assert_eq!(table_a, fs::read(run.join("analysis/amplitude.csv")).unwrap());
    let report: serde_json::Value = serde_json::from_slice(&report_a).unwrap();
    assert_eq!(report["regime"], "supercritical");
    assert!(report["final_focusing"].as_f64().unwrap() <= 2e-3);

    // tampering with an output is caught before analysis
    let series = run.join("series.csv");
    let mut text = fs::read_to_string(&series).unwrap();
    text.push_str("\n");
    fs::write(&series, text).unwrap();
    let out = bnls(&["analyze", path_str(&run)]);
    assert_eq!(out.status.code(), Some(8));
}

#[test]
fn step_limit_has_its_own_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("limited.toml");
    fs::write(&cfg, SHORT_RUN.replace("l_stop = 2e-3", "l_stop = 2e-3\nmax_steps = 20")).unwrap();
    let run = dir.path().join("run");
    let out = bnls(&["simulate", "--config", path_str(&cfg), "--out-dir", path_str(&run)]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&run.join("manifest.json"))["halt"], "max_steps");
}

#[test]
fn l_stop_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.toml");
    fs::write(&cfg, SHORT_RUN).unwrap();
    let run = dir.path().join("run");
    let out = bnls(&["simulate", "--config", path_str(&cfg), "--out-dir", path_str(&run), "--l-stop", "0.02"]);
    assert!(out.status.success());
    let m = json(&run.join("manifest.json"));
    assert_eq!(m["config"]["l_stop"].as_f64(), Some(0.02));
}

#[test]
fn every_preset_is_listed() {
    let out = bnls(&["presets"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["crit-1d", "crit-2d", "super-1d", "super-2d", "universality-1d", "sharpness-1d", "sharpness-2d", "subcrit-1d", "gs-3d"] {
        assert!(text.lines().any(|l| l == name), "{name}");
    }
}
