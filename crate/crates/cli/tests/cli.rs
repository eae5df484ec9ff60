use std::path::Path;
use std::process::{Command, Output};

use gmnl::fixtures::ghz_witness_scenario;
use gmnl::inequalities::Catalog;
use gmnl::membership::{CertificateFile, LocalityClass};

fn gmnl(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmnl")).args(args).current_dir(dir).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Last whitespace-separated number on the first line starting with `prefix`.
fn number_after(o: &Output, prefix: &str) -> f64 {
    let text = stdout(o);
    let line = text.lines().find(|l| l.starts_with(prefix)).unwrap_or_else(|| panic!("no {prefix:?} in {text}"));
    line.split_whitespace().nth(1).unwrap().parse().unwrap()
}

fn with_fixtures() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let o = gmnl(&["fixtures-export", "--dir", "fx"], dir.path());
    assert!(o.status.success());
    dir
}

#[test]
fn classify_reports_membership_through_exit_code() {
    let dir = with_fixtures();
    let o = gmnl(&["classify", "fx/corr1.json", "--class", "t2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let cert = std::fs::read_to_string(dir.path().join("fx/corr1.t2.cert.json")).unwrap();
    assert!(CertificateFile::from_json(&cert).unwrap().member);

    let o = gmnl(&["classify", "fx/corr1.json", "--class", "ns2", "--certificate", "ns2.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let cert = CertificateFile::from_json(&std::fs::read_to_string(dir.path().join("ns2.json")).unwrap()).unwrap();
    assert_eq!(cert.class, LocalityClass::Ns2);
    assert!(cert.functional.is_some());
}

#[test]
fn classify_in_double_mode() {
    let dir = with_fixtures();
    let o = gmnl(&["classify", "fx/s2_mixture.json", "--class", "s2", "--mode", "double"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let o = gmnl(&["classify", "fx/s2_mixture.json", "--class", "t2", "--mode", "double"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn malformed_input_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"scenario":[3,2,2],"mode":"rational","p":["1"]}"#).unwrap();
    let o = gmnl(&["classify", "bad.json", "--class", "t2"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = gmnl(&["classify", "missing.json", "--class", "t2"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = gmnl(&["maximize", "--family", "6", "--bogus"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn maximize_prints_exact_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let o = gmnl(&["maximize", "--family", "6", "--class", "s2"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).lines().any(|l| l.split_whitespace().nth(1) == Some("73/7")), "{}", stdout(&o));
    let o = gmnl(&["maximize", "--family", "185", "--class", "ns2"], dir.path());
    assert!(stdout(&o).lines().any(|l| l.split_whitespace().nth(1) == Some("4")));
    let o = gmnl(&["maximize", "--ineq", "i"], dir.path());
    assert_eq!(stdout(&o).lines().filter(|l| l.split_whitespace().nth(1) == Some("0")).count(), 2);
    let o = gmnl(&["maximize", "--family", "9999"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn evaluate_is_exact_on_rational_files() {
    let dir = with_fixtures();
    let o = gmnl(&["evaluate", "fx/s2_mixture.json", "--ineq", "i"], dir.path());
    assert!(stdout(&o).starts_with("1/4 "));
}

#[test]
fn threshold_of_ghz() {
    let dir = tempfile::tempdir().unwrap();
    let o = gmnl(&["threshold", "--state", "ghz", "--class", "ns2", "--angles", "a.jsonl"], dir.path());
    assert!(o.status.success());
    assert!((number_after(&o, "threshold") - 0.5f64.sqrt()).abs() < 1e-3);
    assert_eq!(std::fs::read_to_string(dir.path().join("a.jsonl")).unwrap().lines().count(), 6);
}

#[test]
fn thresholds_of_w() {
    let dir = tempfile::tempdir().unwrap();
    for (class, want) in [("t2", 0.8204), ("s2", 0.9186)] {
        let o = gmnl(&["threshold", "--state", "w", "--class", class], dir.path());
        assert!((number_after(&o, "threshold") - want).abs() < 3e-3, "{class}: {}", stdout(&o));
    }
}

#[test]
fn quantum_eval_of_fixed_angles() {
    let dir = tempfile::tempdir().unwrap();
    let angles = ghz_witness_scenario().measurements.to_angle_file();
    std::fs::write(dir.path().join("ghz.angles"), angles).unwrap();
    let o = gmnl(
        &["quantum-eval", "--state", "ghz", "--angles", "ghz.angles", "--ineq", "ghz-witness", "--out", "b.json"],
        dir.path(),
    );
    assert!(o.status.success());
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - (1.0 + 2.0 * 2f64.sqrt())).abs() < 1e-6);
    assert!(dir.path().join("b.json").exists());

    // Zero correlators leave only the constant term.
    let o = gmnl(&["quantum-eval", "--state", "mixed", "--angles", "ghz.angles", "--ineq", "6"], dir.path());
    let v: f64 = stdout(&o).trim().parse().unwrap();
    let constant = Catalog::embedded().get(6).unwrap().expression.constant().clone();
    assert!((v - gmnl::Scalar::to_f64(&constant)).abs() < 1e-12);
}

#[test]
fn quantum_optimize_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let o = gmnl(
        &["quantum-optimize", "--state", "w", "--ineq", "138", "--restarts", "20", "--angles", "w.angles"],
        dir.path(),
    );
    assert!(o.status.success());
    assert!((number_after(&o, "value") - 12.4862).abs() < 1e-2);
    let o = gmnl(&["quantum-eval", "--state", "w", "--angles", "w.angles", "--ineq", "138"], dir.path());
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - 12.4862).abs() < 1e-2);
}

#[test]
fn catalog_verification_passes_and_catches_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let o = gmnl(&["catalog-verify", "--families", "1-20,184"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.contains(" ok")).count(), 21);

    let text = Catalog::embedded().to_jsonl().replacen(r#""s2":"73/7""#, r#""s2":"10""#, 1);
    std::fs::write(dir.path().join("tampered.jsonl"), text).unwrap();
    let o = gmnl(&["catalog-verify", "--catalog", "tampered.jsonl", "--families", "6"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn catalog_facets() {
    let dir = tempfile::tempdir().unwrap();
    let o = gmnl(&["catalog-verify", "--families", "1,6,185", "--facets"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).matches("rank 25/25 ok").count(), 3);
}

#[test]
fn scan_grid_two_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let o = gmnl(&["scan", "--grid", "2", "--report", "a.txt"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = gmnl(&["--threads", "1", "scan", "--grid", "2", "--report", "b.txt"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let a = std::fs::read(dir.path().join("a.txt")).unwrap();
    let b = std::fs::read(dir.path().join("b.txt")).unwrap();
    assert_eq!(a, b);
    assert!(String::from_utf8(a).unwrap().contains("non-violating 0"));
}

#[test]
fn scan_rejects_a_single_point_grid() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(gmnl(&["scan", "--grid", "1"], dir.path()).status.code(), Some(2));
}
