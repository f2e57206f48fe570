//! End-to-end runs of the `scvlab` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn scvlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scvlab")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn certificates(dir: &Path) -> Vec<Value> {
    let text = std::fs::read_to_string(dir.join("certificates.json")).unwrap();
    serde_json::from_str::<Value>(&text).unwrap().as_array().unwrap().clone()
}

#[test]
fn weights_suite_with_one_scale_gives_eleven_passing_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "w.json", r#"{"suites": {"weights": {"s": [0.1], "points": 2000}}}"#);
    let out = dir.path().join("out");
    let o = scvlab(&["weights", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let certs = certificates(&out);
    assert_eq!(certs.len(), 11);
    assert!(certs.iter().all(|c| c["pass"] == Value::Bool(true)));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 11);
    assert!(stdout.lines().all(|l| l.starts_with("PASS ")));

    let csv = std::fs::read_to_string(out.join("weights_s1e-1.csv")).unwrap();
    assert!(csv.starts_with("label,x,y,lhs,rhs,margin\n"));
    assert!(!csv.contains('\r'));
    let sixth = std::fs::read_to_string(out.join("sixth_bound.csv")).unwrap();
    assert!(sixth.starts_with("label,x,lhs,rhs,margin\n"));
}

#[test]
fn hormander_suite_passes_with_positive_margin() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "h.json",
        r#"{"domain": {"kind": "disc", "params": {"center": [0, 0], "radius": 1}},
            "weight": "x1^2 + y1^2", "resolution": 64,
            "suites": {"hormander": {"form": ["1"], "degrees": [4, 8]}}}"#,
    );
    let out = dir.path().join("out");
    let o = scvlab(&["hormander", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let certs = certificates(&out);
    let est = certs.iter().find(|c| c["check"] == "hormander_estimate").unwrap();
    assert!(est["margin"].as_f64().unwrap() > 0.0);
    let csv = std::fs::read_to_string(out.join("hormander_degrees.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn non_psh_weight_fails_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "p.json", r#"{"weight": "-x1^2-y1^2", "suites": {"psh": {"resolution": 32}}}"#);
    let out = dir.path().join("out");
    let o = scvlab(&["psh", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let certs = certificates(&out);
    let c = certs.iter().find(|c| c["check"] == "psh_weight").unwrap();
    assert_eq!(c["pass"], Value::Bool(false));
    assert_eq!(c["witness"]["values"].as_array().unwrap().len(), 2);
}

#[test]
fn module_error_becomes_failed_certificate() {
    let dir = tempfile::tempdir().unwrap();
    // Two-variable compact set against a one-variable domain.
    let cfg = write(
        dir.path(),
        "h.json",
        r#"{"domain": {"kind": "disc", "params": {"center": [0, 0], "radius": 1}},
            "suites": {"hull": {"compact": {"kind": "torus", "centers": [[0, 0], [0, 0]], "radii": [0.5, 0.5], "nodes": 8}}}}"#,
    );
    let out = dir.path().join("out");
    let o = scvlab(&["hull", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let certs = certificates(&out);
    assert_eq!(certs.len(), 1);
    assert_eq!(certs[0]["pass"], Value::Bool(false));
    assert!(certs[0]["error"].as_str().unwrap().contains("dimension mismatch"));
}

#[test]
fn usage_and_config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(scvlab(&["--bogus"]).status.code(), Some(2));
    assert_eq!(scvlab(&["lp"]).status.code(), Some(2));
    let bad_json = write(dir.path(), "a.json", "{\"seed\": ");
    assert_eq!(scvlab(&["lp", "--config", &bad_json]).status.code(), Some(2));
    let bad_schema = write(dir.path(), "b.json", r#"{"suites": {"lp": {"steps": -1}}}"#);
    let o = scvlab(&["lp", "--config", &bad_schema]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/suites/lp/steps"));
}

#[test]
fn tolerance_override_changes_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "t.json", r#"{"tolerances": {"lp_breakdown_exponents": -1.0}}"#);
    let out = dir.path().join("out");
    let o = scvlab(&["lp", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let certs = certificates(&out);
    let c = certs.iter().find(|c| c["check"] == "lp_breakdown_exponents").unwrap();
    assert_eq!(c["pass"], Value::Bool(false));
    assert_eq!(c["tolerance"].as_f64(), Some(-1.0));
}

#[test]
fn seed_changes_random_suites_only_through_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "o.json", r#"{"suites": {"operator": {"instances": 5, "samples": 50}}}"#);
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let o = scvlab(&["operator", "--config", &cfg, "--seed", seed, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        std::fs::read(out.join("certificates.json")).unwrap()
    };
    let a = run("3", "a");
    let b = run("3", "b");
    let c = run("4", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
}
