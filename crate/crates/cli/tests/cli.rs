use std::f64::consts::{E, PI};
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_circle-opers")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn small_config(dir: &TempDir) -> String {
    write(dir, "small.json", r#"{"n": 3, "group": "PSO", "instances": 4, "seed": 11}"#)
}

#[test]
fn passing_suite_exits_zero() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(&dir);
    let out = run(&["verify", "adjoint", "--config", &cfg]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert_eq!(report["pass"], true);
    assert_eq!(report["suite"], "adjoint");
}

#[test]
fn failing_certification_exits_one() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(&dir);
    let out = run(&["verify", "monodromy", "--config", &cfg, "--tol", "1e-300"]);
    assert_eq!(code(&out), 1);
    let report = stdout_json(&out);
    assert_eq!(report["pass"], false);
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.iter().any(|c| c["name"] == "certify_group" && c["pass"] == false));

    let out = run(&["monodromy", "--n", "2", "--tol", "1e-300"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn config_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    for args in [
        vec!["adjoint", "--n", "3", "--group", "psp"],
        vec!["adjoint", "--n", "2", "--group", "pso"],
        vec!["monodromy", "--steps", "1000"],
        vec!["verify", "nonsense"],
        vec!["adjoint", "--group", "gl"],
        vec!["export"],
    ] {
        let out = run(&args);
        assert_eq!(code(&out), 2, "{args:?}");
        assert!(out.stdout.is_empty(), "{args:?}");
    }
    let bad = write(&dir, "bad.json", r#"{"n": 2, "wavelength": 3}"#);
    assert_eq!(code(&run(&["adjoint", "--config", &bad])), 2);
    let missing = dir.path().join("absent.json");
    assert_eq!(code(&run(&["adjoint", "--config", missing.to_str().unwrap()])), 2);
}

#[test]
fn malformed_config_writes_no_report() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.json", "{ n: 2 ");
    let report = dir.path().join("report.json");
    let out = run(&["verify", "adjoint", "--config", &bad, "--out", report.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(!report.exists());
}

#[test]
fn unwritable_output_exits_three() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(&dir);
    let target = dir.path().join("no/such/dir/report.json");
    let out = run(&["verify", "adjoint", "--config", &cfg, "--out", target.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    let out = run(&["export", "--n", "2", "--out", target.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
}

#[test]
fn reports_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(&dir);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = run(&["verify", "agd", "--config", &cfg, "--out", path.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn flags_override_config() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(&dir);
    let out = run(&["verify", "adjoint", "--config", &cfg, "--n", "4", "--group", "psp"]);
    assert_eq!(code(&out), 0);
    let report = stdout_json(&out);
    assert_eq!(report["config"]["n"], 4);
    assert_eq!(report["config"]["group"], "PSp");
    assert_eq!(report["config"]["instances"], 4);
}

fn read_sidecar(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path.with_extension("json")).unwrap()).unwrap()
}

#[test]
fn export_harmonic_oscillator() {
    let dir = TempDir::new().unwrap();
    let q = (2.0 * PI).powi(2);
    let input = write(&dir, "op.json", &format!(r#"{{"n": 2, "group": "PSL", "coeffs": [[{q}], [0.0]]}}"#));
    let csv = dir.path().join("curve.csv");
    let out = run(&["export", "--input", &input, "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,g1,g2"));
    assert_eq!(lines.count(), 4097);

    let side = read_sidecar(&csv);
    assert_eq!(side["n"], 2);
    assert_eq!(side["winding"], 2);
    let m = side["monodromy"].as_array().unwrap();
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.as_array().unwrap().iter().enumerate() {
            let expect = if i == j { 1.0 } else { 0.0 };
            assert!((v.as_f64().unwrap() - expect).abs() < 1e-6, "M[{i}][{j}] = {v}");
        }
    }
}

#[test]
fn export_d3_minus_d() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "op.json", r#"{"n": 3, "coeffs": [[0.0], [-1.0], [0.0]]}"#);
    let csv = dir.path().join("curve.csv");
    let out = run(&["export", "--input", &input, "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("t,g1,g2,g3"));
    assert!(text.lines().skip(1).all(|l| l.split(',').count() == 4));
    assert_eq!(read_sidecar(&csv)["n"], 3);

    let out = run(&["monodromy", "--input", &input]);
    assert_eq!(code(&out), 0);
    let mut eig: Vec<f64> = stdout_json(&out)["spectrum"]
        .as_array()
        .unwrap()
        .iter()
        .map(|z| {
            assert!(z[1].as_f64().unwrap().abs() < 1e-9);
            z[0].as_f64().unwrap()
        })
        .collect();
    eig.sort_by(f64::total_cmp);
    for (got, want) in eig.iter().zip([1.0 / E, 1.0, E]) {
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
}

#[test]
fn ds_reduce_round_trips_companion() {
    let out = run(&["ds-reduce", "--n", "3", "--group", "pso", "--seed", "5"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert!(v["gauge_residual"].as_f64().unwrap() < 1e-9);
    assert_eq!(v["operator"]["n"], 3);
}

#[test]
fn bracket_is_antisymmetric() {
    let out = run(&["bracket", "--n", "2"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    let xy = v["bracket_xy"].as_f64().unwrap();
    assert!(v["antisymmetry_residual"].as_f64().unwrap() <= 1e-9 * xy.abs().max(1.0));
}

#[test]
fn dual_law_holds_by_default() {
    let out = run(&["dual", "--n", "3", "--group", "pso"]);
    assert_eq!(code(&out), 0);
    assert!(stdout_json(&out)["dual_law_residual"].as_f64().unwrap() < 1e-5);
}
