//! End-to-end tests of the command-line interface: exit codes, output
//! schemas, and byte-level determinism.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_freeclt")
}

fn run(args: &[&str]) -> std::process::Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn write(path: &Path, content: &str) {
    fs::write(path, content).unwrap();
}

#[test]
fn solve_happy_path_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("solve.json");
    write(
        &cfg,
        r#"{
            "spec": {"m": 1, "coeffs": [[[[1.0, 0.0]]]], "sigma": [[1.0]]},
            "b": [[[3.0, 0.0]]]
        }"#,
    );
    let out = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(dir.path().join("solve_report.json")).unwrap();
    assert!(report.contains("3.81966011250"), "report: {report}");
    assert!(report.contains("\"certified\": false"));
}

#[test]
fn malformed_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    write(&cfg, "{ not json");
    let out = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("extra.json");
    write(
        &cfg,
        r#"{
            "spec": {"m": 1, "coeffs": [[[[1.0, 0.0]]]], "sigma": [[1.0]]},
            "b": [[[3.0, 0.0]]],
            "surprise": true
        }"#,
    );
    let out = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn exhausted_iteration_budget_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("hard.json");
    write(
        &cfg,
        r#"{
            "spec": {"m": 1, "coeffs": [[[[1.0, 0.0]]]], "sigma": [[1.0]]},
            "b": [[[2.2, 0.0]]],
            "max_iter": 1
        }"#,
    );
    let out = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("solve_report.json").exists(), "no partial output on failure");
}

fn rate_config(kind: &str, assertions: &str) -> String {
    format!(
        r#"{{
            "model": {{
                "m": 1,
                "coeffs": [[[[1.0, 0.0]]]],
                "family": {{"components": [{{"kind": "{kind}"}}], "order": 32}}
            }},
            "n_list": [4, 16, 64],
            "grid": {{"kind": "scalar_ray", "start_factor": 1.1, "stop_factor": 2.0, "count": 3}},
            "seed": 5
            {assertions}
        }}"#
    )
}

#[test]
fn clt_rate_outputs_are_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("rate.json");
    write(&cfg, &rate_config("bernoulli", ""));
    let out1 = dir.path().join("run1");
    let out2 = dir.path().join("run2");
    for out_dir in [&out1, &out2] {
        let out = run(&[
            "clt-rate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--workers",
            "2",
        ]);
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    let rows1 = fs::read(out1.join("rows.csv")).unwrap();
    let rows2 = fs::read(out2.join("rows.csv")).unwrap();
    assert_eq!(rows1, rows2, "CSV output must be byte-identical");
    let sum1 = fs::read(out1.join("summary.json")).unwrap();
    let sum2 = fs::read(out2.join("summary.json")).unwrap();
    assert_eq!(sum1, sum2, "summary output must be byte-identical");
    let header = String::from_utf8(rows1).unwrap();
    assert!(header.starts_with("n,b_id,norm_b,diff,scaled,theta_norm,subord_resid\n"));
}

#[test]
fn semicircular_self_test_passes_max_diff_assertion() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("rate.json");
    write(
        &cfg,
        r#"{
            "model": {
                "m": 1,
                "coeffs": [[[[1.0, 0.0]]]],
                "family": {"components": [{"kind": "semicircular", "variance": 1.0}], "order": 32}
            },
            "n_list": [4, 16, 64],
            "grid": {"kind": "scalar_ray", "start_factor": 1.1, "stop_factor": 2.0, "count": 3},
            "seed": 5,
            "assertions": {"max_diff": 1e-9}
        }"#,
    );
    let out = run(&[
        "clt-rate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn violated_assertion_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("rate.json");
    write(&cfg, &rate_config("bernoulli", r#", "assertions": {"max_diff": 1e-30}"#));
    let out = run(&[
        "clt-rate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn invalid_grid_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("rate.json");
    // Lambda grid point far outside the conservative domain.
    write(
        &cfg,
        r#"{
            "model": {
                "m": 1,
                "coeffs": [[[[1.0, 0.0]]]],
                "family": {"components": [{"kind": "bernoulli"}], "order": 32}
            },
            "n_list": [4],
            "grid": {"kind": "lambda", "lambdas": [[0.5, 0.0]], "mu": [0.5, 0.0]}
        }"#,
    );
    let out = run(&["clt-rate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn poly_identity_row_contains_semicircle_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("poly.json");
    write(
        &cfg,
        r#"{
            "polynomial": "x1",
            "family": {"components": [{"kind": "semicircular", "variance": 1.0}], "order": 96},
            "n_list": [4],
            "z_grid": {"kind": "list", "points": [[3.0, 0.0]]},
            "tol": 1e-10
        }"#,
    );
    let out = run(&["poly", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("poly_rows.csv")).unwrap();
    assert!(csv.contains("3.81966011"), "csv: {csv}");
}

#[test]
fn check_linearization_pass_and_corrupted_fail() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("check.json");
    write(&cfg, r#"{"polynomial": "x1^2", "d": 1, "trials": 40, "size": 5}"#);
    let out = run(&[
        "check-linearization",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(dir.path().join("check.json")).unwrap();
    assert!(report.contains("\"pass\": true"));

    // Corrupt one pencil entry by 0.1: the residual must blow past 1e-2 and
    // the command must exit 3.
    let cfg2 = dir.path().join("check_bad.json");
    write(
        &cfg2,
        r#"{
            "polynomial": "x1^2",
            "d": 1,
            "trials": 40,
            "size": 5,
            "pencil_override": {
                "a0": [[[0.0, 0.0], [0.0, 0.0]], [[0.1, 0.0], [0.0, 0.0]]],
                "coeffs": [[[[0.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [0.0, 0.0]]]],
                "degree": 2
            }
        }"#,
    );
    let out_bad = dir.path().join("bad");
    let out = run(&[
        "check-linearization",
        "--config",
        cfg2.to_str().unwrap(),
        "--out",
        out_bad.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let report = fs::read_to_string(out_bad.join("check.json")).unwrap();
    assert!(report.contains("\"pass\": false"));
}

#[test]
fn density_semicircle_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("density.json");
    write(
        &cfg,
        r#"{
            "target": {"kind": "semicircle", "variance": 1.0},
            "xmin": -2.5, "xmax": 2.5, "points": 51,
            "oracle": "semicircle"
        }"#,
    );
    let out = run(&["density", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dir.path().join("summary.json")).unwrap();
    assert!(summary.contains("sup_error_vs_oracle"));
    assert!(dir.path().join("density.csv").exists());
    assert!(dir.path().join("cdf.csv").exists());
    let csv = fs::read_to_string(dir.path().join("density.csv")).unwrap();
    assert!(csv.starts_with("x,density\n"));
}

#[test]
fn mc_invalid_size_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("mc.json");
    write(
        &cfg,
        r#"{
            "model": {
                "m": 1,
                "coeffs": [[[[1.0, 0.0]]]],
                "family": {"components": [{"kind": "bernoulli"}], "order": 32}
            },
            "n": 1, "b": [[[4.0, 0.0]]], "size": 0, "samples": 2
        }"#,
    );
    let out = run(&["mc", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn mc_small_run_reports_diff() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("mc.json");
    write(
        &cfg,
        r#"{
            "model": {
                "m": 1,
                "coeffs": [[[[1.0, 0.0]]]],
                "family": {"components": [{"kind": "bernoulli"}], "order": 96}
            },
            "n": 2, "b": [[[3.0, 0.0]]], "size": 60, "samples": 3, "seed": 9
        }"#,
    );
    let out = run(&["mc", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(dir.path().join("mc.json")).unwrap();
    assert!(report.contains("\"diff\""));
    assert!(report.contains("\"stderr\""));
}
