//! End-to-end checks of the command line interface: exit codes, report
//! schema, and byte reproducibility of outputs.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stvenant"))
}

fn write_domain(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn disk_json() -> &'static str {
    r#"{"kind": "disk", "params": {"center": [0.0, 0.0], "radius": 1.0}, "dimension": 2}"#
}

fn square_json() -> &'static str {
    r#"{"kind": "rectangle", "params": {"corner_min": [0.0, 0.0], "corner_max": [1.0, 1.0]}, "dimension": 2}"#
}

fn annulus_json() -> &'static str {
    r#"{"kind": "annulus", "params": {"center": [0.0, 0.0], "r_inner": 1.0, "r_outer": 2.0}, "dimension": 2}"#
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn compute_emits_schema_complete_json_and_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let domain = write_domain(dir.path(), "square.json", square_json());
    let out1 = dir.path().join("r1.json");
    let out2 = dir.path().join("r2.json");

    for out in [&out1, &out2] {
        let status = bin()
            .args(["compute", "--domain"])
            .arg(&domain)
            .args(["--p", "2", "--h", "0.1", "--seed", "42", "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
    }

    let bytes1 = std::fs::read(&out1).unwrap();
    let bytes2 = std::fs::read(&out2).unwrap();
    assert_eq!(bytes1, bytes2, "same run must produce identical bytes");

    let doc: serde_json::Value = serde_json::from_slice(&bytes1).unwrap();
    for key in [
        "Q_q",
        "Q_q_ball_r_omega",
        "Q_q_dual_route",
        "Q_q_pairing_route",
        "domain",
        "estimated_error",
        "lambda_Ap_bracket",
        "lambda_B2",
        "lambda_Bp",
        "mesh_h",
        "metadata",
        "p",
        "q",
        "r_omega",
        "rho",
        "sqrt_rho",
    ] {
        assert!(doc.get(key).is_some(), "missing key {key}");
    }
    assert_eq!(doc["metadata"]["residual_seed"], 42);
    assert!(doc["lambda_Ap_bracket"].get("lower").is_some());
}

#[test]
fn compute_at_p1_reports_infinite_dual_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let domain = write_domain(dir.path(), "square.json", square_json());
    let out = bin()
        .args(["compute", "--domain"])
        .arg(&domain)
        .args(["--p", "1", "--h", "0.1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(doc["q"], "inf");
    assert!(doc["Q_q_dual_route"].is_null());
    assert!(doc["metadata"]["torsion_residual"].is_null());
}

#[test]
fn verify_exits_zero_when_nothing_is_violated() {
    let dir = tempfile::tempdir().unwrap();
    let domain = write_domain(dir.path(), "disk.json", disk_json());
    let results = dir.path().join("results.json");
    let out = bin()
        .args(["verify", "--domain"])
        .arg(&domain)
        .args(["--p", "2", "--h", "0.05", "--out"])
        .arg(&results)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("L2eq"));
    assert!(text.contains("holds_with_equality"));
    assert!(!text.contains(" violated"));

    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&results).unwrap()).unwrap();
    let entries = doc.as_array().unwrap();
    assert!(entries.iter().any(|e| e["id"] == "BALL_EQUALITY"));
}

#[test]
fn verify_flags_the_holed_domain_rigidity_claim() {
    // With a hole the rigidity square root strictly dominates the torsion
    // value, so the strict claim of TOR_EQUALITY fails by a wide margin
    // and the process reports it through the exit code.
    let dir = tempfile::tempdir().unwrap();
    let domain = write_domain(dir.path(), "annulus.json", annulus_json());
    let out = bin()
        .args(["verify", "--domain"])
        .arg(&domain)
        .args(["--p", "2", "--h", "0.1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let text = stdout_of(&out);
    assert!(text.contains("TOR_EQUALITY"));
    assert!(text.contains("violated"));
}

#[test]
fn verify_exits_three_when_the_solver_is_starved() {
    let dir = tempfile::tempdir().unwrap();
    let domain = write_domain(dir.path(), "square.json", square_json());
    let out = bin()
        .args(["verify", "--domain"])
        .arg(&domain)
        .args(["--p", "3", "--h", "0.1", "--tol", "1e-15", "--max-iter", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout_of(&out).contains("inconclusive"));
}

#[test]
fn converge_writes_aligned_csv() {
    let dir = tempfile::tempdir().unwrap();
    let domain = write_domain(dir.path(), "square.json", square_json());
    let out_path = dir.path().join("study.csv");
    let status = bin()
        .args(["converge", "--domain"])
        .arg(&domain)
        .args(["--p", "2", "--h", "0.2,0.1,0.05", "--out"])
        .arg(&out_path)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    let text = std::fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "h,Q_q,Q_q_delta,Q_q_order,sqrt_rho,lambda_B2,flag");
    assert_eq!(lines.len(), 4);
    assert!(lines.iter().skip(1).all(|l| l.ends_with(",ok")));

    // Rerun into a second file: byte-identical.
    let out2 = dir.path().join("study2.csv");
    bin()
        .args(["converge", "--domain"])
        .arg(&domain)
        .args(["--p", "2", "--h", "0.2,0.1,0.05", "--out"])
        .arg(&out2)
        .status()
        .unwrap();
    assert_eq!(
        std::fs::read(&out_path).unwrap(),
        std::fs::read(&out2).unwrap()
    );
}

#[test]
fn usage_and_input_errors_exit_three() {
    // Unknown flag.
    let out = bin().args(["compute", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));

    // Missing domain file.
    let out = bin()
        .args([
            "compute",
            "--domain",
            "/nonexistent/no.json",
            "--p",
            "2",
            "--h",
            "0.1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));

    // Malformed domain spec (inner radius above outer).
    let dir = tempfile::tempdir().unwrap();
    let domain = write_domain(
        dir.path(),
        "bad.json",
        r#"{"kind": "annulus", "params": {"center": [0.0, 0.0], "r_inner": 2.0, "r_outer": 1.0}, "dimension": 2}"#,
    );
    let out = bin()
        .args(["verify", "--domain"])
        .arg(&domain)
        .args(["--p", "2", "--h", "0.1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));

    // Non-decreasing resolution list for the study.
    let good = write_domain(dir.path(), "square.json", square_json());
    let out = bin()
        .args(["converge", "--domain"])
        .arg(&good)
        .args(["--p", "2", "--h", "0.05,0.1,0.2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));

    // Help still exits zero.
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}
