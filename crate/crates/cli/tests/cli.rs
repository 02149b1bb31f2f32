use std::path::Path;
use std::process::{Command, Output};

use sigmafloor_cli::config::ExperimentConfig;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sigmafloor"));
    c.env_remove("SIGMAFLOOR_WORKERS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const GAUSS_12_10: &str = r#"{"N": 12, "n": 10, "profile": {"kind": "constant", "entries": [{"family": "gaussian"}]}}"#;

#[test]
fn selftest_passes_and_lists_every_check() {
    let o = run(&["selftest"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    for name in sigmafloor_cli::selftest::CHECKS {
        assert!(out.contains(&format!("PASS {name}:")), "{name} missing in\n{out}");
    }
}

#[test]
fn injected_fault_fails_the_named_check() {
    for name in ["bkappa-subset-oracle", "classify-brute-force", "determinism"] {
        let o = run(&["selftest", "--inject-fault", name]);
        assert_eq!(o.status.code(), Some(1));
        let out = stdout(&o);
        assert!(out.contains(&format!("FAIL {name}:")), "{out}");
        assert!(out.contains(&format!("failed checks: {name}")), "{out}");
        assert_eq!(out.matches("FAIL").count(), 1);
    }
}

#[test]
fn unknown_operation_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"operation": "frobnicate", "seed": 1}"#);
    let o = run(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("operation"), "{}", stderr(&o));
}

#[test]
fn strict_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"operation": "bkappa", "seed": 1, "colour": 3}"#, "colour"),
        (r#"{"operation": "bkappa", "out": "x"}"#, "seed"),
        (
            r#"{"operation": "bkappa", "seed": 1, "out": "x", "options": {"kappa": 2.0, "y": [1.0], "z": 1}}"#,
            "z",
        ),
        (
            r#"{"operation": "sigma_tail_curve", "seed": 1, "out": "x", "grid": [0.1], "trials": 10,
                "spec": {"N": 3, "n": 2, "profile": {"kind": "constant", "entries": [{"family": "gaussian", "sd": 1.0}]}}}"#,
            "sd",
        ),
    ];
    for (k, (text, needle)) in cases.iter().enumerate() {
        let cfg = write(dir.path(), &format!("c{k}.json"), text);
        let o = run(&["run", "--config", &cfg]);
        assert_eq!(o.status.code(), Some(2), "case {k}");
        assert!(stderr(&o).contains(needle), "case {k}: {}", stderr(&o));
    }
}

#[test]
fn config_round_trip() {
    let text = r#"{
        "operation": "sigma_tail_curve",
        "spec": {"N": 12, "n": 10, "profile": {"kind": "per_column", "entries": [
            {"family": "gaussian", "mean": 0.0, "variance": 1.0},
            {"family": "rademacher", "mean": 0.0, "variance": 2.0},
            {"family": "symmetric_pareto", "alpha": 5.0, "mean": 0.0, "variance": 1.0},
            {"family": "uniform_interval", "mean": 0.5, "variance": 1.0},
            {"family": "lattice_uniform", "mean": 0.0, "variance": 1.0},
            {"family": "gaussian", "mean": 0.0, "variance": 1.0},
            {"family": "gaussian", "mean": 0.0, "variance": 1.0},
            {"family": "gaussian", "mean": 0.0, "variance": 1.0},
            {"family": "gaussian", "mean": 0.0, "variance": 1.0},
            {"family": "gaussian", "mean": 0.0, "variance": 1.0}]},
            "assumptions": [{"kind": "HS", "K": 2.0}]},
        "grid": [0.1, 0.2],
        "trials": 1000,
        "seed": 42,
        "out": "results/run",
        "options": {"anything": [1, 2]}
    }"#;
    let cfg = ExperimentConfig::from_json(text).unwrap();
    let again: serde_json::Value = serde_json::from_str(&cfg.to_json()).unwrap();
    let orig: serde_json::Value = serde_json::from_str(text).unwrap();
    assert_eq!(again, orig);
    assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    let path_form = r#"{"operation": "sigma_tail_curve", "spec": "spec.json", "seed": 3}"#;
    let cfg = ExperimentConfig::from_json(path_form).unwrap();
    let again: serde_json::Value = serde_json::from_str(&cfg.to_json()).unwrap();
    assert_eq!(again, serde_json::from_str::<serde_json::Value>(path_form).unwrap());
}

#[test]
fn bkappa_run_on_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bk").to_string_lossy().into_owned();
    let text = format!(
        r#"{{"operation": "bkappa", "seed": 0, "out": "{out}",
            "options": {{"matrix": [[2.0, 0.0], [0.0, 1.0]], "kappa": {}}}}}"#,
        2f64.sqrt()
    );
    let cfg = write(dir.path(), "c.json", &text);
    let o = run(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(format!("{out}.json")).unwrap()).unwrap();
    assert!((v["value"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(v["S"], serde_json::json!([0]));
    assert!(stdout(&o).starts_with("operation=bkappa rows=1 elapsed="));
}

#[test]
fn bkappa_one_shot_csv_and_json_agree() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(dir.path(), "m.csv", "3,0,1\n0,1,0\n0,0,0\n");
    let json = write(dir.path(), "y.json", r#"{"y": [9.0, 1.0, 1.0]}"#);
    let a = run(&["bkappa", "--input", &csv, "--kappa", "3"]);
    let b = run(&["bkappa", "--input", &json, "--kappa", "3"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    let va: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    let vb: serde_json::Value = serde_json::from_slice(&b.stdout).unwrap();
    assert_eq!(va, vb);
    for key in ["value", "S", "c", "weights"] {
        assert!(va.get(key).is_some(), "{key}");
    }
    let mut child = bin()
        .args(["bkappa", "--input", "-", "--kappa", "3"])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    use std::io::Write;
    child.stdin.take().unwrap().write_all(b"[9, 1, 1]").unwrap();
    let vc: serde_json::Value = serde_json::from_slice(&child.wait_with_output().unwrap().stdout).unwrap();
    assert_eq!(va, vc);
}

#[test]
fn non_finite_input_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(dir.path(), "m.csv", "1,NaN\n0,1\n");
    let o = run(&["bkappa", "--input", &csv, "--kappa", "2"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let bad = write(dir.path(), "b.csv", "1,x\n");
    assert_eq!(run(&["bkappa", "--input", &bad, "--kappa", "2"]).status.code(), Some(2));
}

#[test]
fn classify_and_concentration_one_shots() {
    let dir = tempfile::tempdir().unwrap();
    let v = write(dir.path(), "v.csv", "0.5,0.5,0.5,0.5\n");
    let o = run(&["classify", "--input", &v, "--delta", "0.25", "--rho", "0.9"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let c: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(c["is_compressible"], false);
    assert_eq!(c["spread_subset"], serde_json::json!([0, 1, 2, 3]));
    let not_unit = write(dir.path(), "w.csv", "1,1\n");
    assert_eq!(run(&["classify", "--input", &not_unit]).status.code(), Some(2));

    let args = ["concentration", "--dist", "rademacher", "--radius", "0.25", "--samples", "5000", "--seed", "9"];
    let a = run(&args);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, run(&args).stdout);
    let q: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    let q_hat = q["q_hat"].as_f64().unwrap();
    assert!((q_hat - 0.5).abs() < 0.03, "{q_hat}");
    let inline = run(&[
        "concentration",
        "--dist",
        r#"{"family": "symmetric_pareto", "alpha": 4.0}"#,
        "--radius",
        "0.25",
        "--samples",
        "100",
        "--seed",
        "1",
    ]);
    assert_eq!(inline.status.code(), Some(0), "{}", stderr(&inline));
}

#[test]
fn tail_curve_runs_are_byte_identical_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        r#"{{"operation": "sigma_tail_curve", "spec": {GAUSS_12_10}, "grid": [0.1, 0.3, 0.5], "trials": 3000, "seed": 5}}"#
    );
    let cfg = write(dir.path(), "c.json", &text);
    let prefix = |k: &str| dir.path().join(k).to_string_lossy().into_owned();
    let a = run(&["run", "--config", &cfg, "--out", &prefix("a")]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    let b = run(&["--workers", "4", "run", "--config", &cfg, "--out", &prefix("b")]);
    let c = bin()
        .env("SIGMAFLOOR_WORKERS", "1")
        .args(["run", "--config", &cfg, "--out", &prefix("c")])
        .output()
        .unwrap();
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(c.status.code(), Some(0));
    let read = |k: &str| std::fs::read(format!("{}.csv", prefix(k))).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_eq!(read("a"), read("c"));
    let csv = String::from_utf8(read("a")).unwrap();
    assert!(csv.starts_with("epsilon,trials,hits,p_hat,wilson_lo,wilson_hi\n"));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{}.meta.json", prefix("a"))).unwrap()).unwrap();
    for key in ["spec_digest", "seed", "N", "n", "operation", "version"] {
        assert!(meta.get(key).is_some(), "{key}");
    }
    assert_eq!(meta["seed"], 5);
    // the seed flag overrides the config
    let d = run(&["run", "--config", &cfg, "--out", &prefix("d"), "--seed", "6"]);
    assert_eq!(d.status.code(), Some(0));
    assert_ne!(read("a"), read("d"));
}

#[test]
fn every_experiment_runs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "x.json",
        r#"{"N": 20, "n": 1, "profile": {"kind": "constant", "entries": [{"family": "gaussian"}]}}"#,
    );
    let configs = [
        format!(
            r#"{{"operation": "bkappa_deviation_curve", "spec": {{"N": 5, "n": 3, "profile": {{"kind": "constant", "entries": [{{"family": "gaussian"}}]}}}},
                "grid": [1.5, 2.0, 3.0], "trials": 2000, "seed": 1, "options": {{"c_factor": 2.0, "beta": 2.0}}}}"#
        ),
        format!(
            r#"{{"operation": "projection_moment_ratio", "spec": "{spec}", "trials": 2000, "seed": 1,
                "options": {{"d": 4, "subspace": "coordinate", "p": 2.0}}}}"#
        ),
        format!(
            r#"{{"operation": "distance_smallball_curve", "spec": "x.json", "grid": [0.1, 0.5, 1.0], "trials": 500,
                "seed": 1, "options": {{"d": 2}}}}"#
        ),
        format!(
            r#"{{"operation": "spread_infimum_proxy", "spec": {GAUSS_12_10}, "trials": 20, "seed": 1,
                "options": {{"columns": [0, 1, 2], "probes": 50}}}}"#
        ),
        format!(
            r#"{{"operation": "check_assumptions", "spec": {{"N": 4, "n": 2, "profile": {{"kind": "constant", "entries": [{{"family": "rademacher"}}]}},
                "assumptions": [{{"kind": "ISO"}}, {{"kind": "HS", "K": 1.0}}]}}, "trials": 1000, "seed": 1}}"#
        ),
    ];
    for (k, text) in configs.iter().enumerate() {
        let cfg = write(dir.path(), &format!("c{k}.json"), text);
        let out = dir.path().join(format!("r{k}")).to_string_lossy().into_owned();
        let o = run(&["run", "--config", &cfg, "--out", &out]);
        assert_eq!(o.status.code(), Some(0), "config {k}: {}", stderr(&o));
        assert!(Path::new(&format!("{out}.meta.json")).exists());
    }
    // the d = 2 distance run also writes the shifted curve
    assert!(dir.path().join("r2.shifted.csv").exists());
}

#[test]
fn failed_hypothesis_and_bad_grid_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"operation": "bkappa_deviation_curve", "spec": {"N": 1, "n": 1, "profile": {"kind": "constant",
        "entries": [{"family": "gaussian"}]}}, "grid": [2.0], "trials": 10, "seed": 1, "out": "x",
        "options": {"c_factor": 1.0}}"#;
    let cfg = write(dir.path(), "c.json", text);
    assert_eq!(run(&["run", "--config", &cfg]).status.code(), Some(2));
    let text = format!(
        r#"{{"operation": "sigma_tail_curve", "spec": {GAUSS_12_10}, "grid": [0.5, 0.1], "trials": 10, "seed": 1, "out": "x"}}"#
    );
    let cfg = write(dir.path(), "d.json", &text);
    assert_eq!(run(&["run", "--config", &cfg]).status.code(), Some(2));
}
