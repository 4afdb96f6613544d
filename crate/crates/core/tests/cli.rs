use std::process::{Command, Output};

use lfdlcq::io::{parse_basis, parse_matrix};
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lfdlcq")).args(args).output().unwrap()
}

fn result(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let last = text.lines().last().unwrap();
    let v: Value = serde_json::from_str(last).unwrap();
    assert_eq!(v["provenance"]["tool"], "lfdlcq");
    v["result"].clone()
}

#[test]
fn basis_listing_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.txt");
    let r = result(&run(&["basis", "--k", "6", "--q", "1", "--out", path.to_str().unwrap()]));
    let b = parse_basis(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(r["dim"], b.len());
    assert!(b.states().iter().all(|s| s.momentum() == 6 && s.charge() == 1));
}

#[test]
fn ham_file_parses_back_and_is_symmetric() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.coo");
    let r = result(&run(&[
        "ham", "--k", "7", "--mb", "1.3", "--mf", "0.7", "--g", "0.9", "--out", path.to_str().unwrap(),
    ]));
    let (h, m) = parse_matrix(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(r["dim"], h.dim);
    assert!(m.max_asymmetry() < 1e-12 * m.max_abs());
}

#[test]
fn free_spectrum_k2() {
    let r = result(&run(&["spectrum", "--k", "2", "--mb", "2", "--mf", "1", "--g", "0", "--nev", "3"]));
    let ev: Vec<f64> = serde_json::from_value(r["eigenvalues"].clone()).unwrap();
    assert_eq!(ev, vec![4.0, 4.0, 16.0]);
}

#[test]
fn resources_match_known_counts() {
    let r = result(&run(&["resources", "--scheme", "compact", "--k", "6"]));
    assert_eq!(r["total_qubits"], 36);
    let r = result(&run(&["resources", "--scheme", "qcd", "--k", "20", "--lperp", "20", "--nf", "5", "--nc", "3"]));
    assert_eq!(r["total_qubits"], 1320);
    assert_eq!(r["delta_vs_reference"], -40);
}

#[test]
fn pdf_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("p.csv");
    let r = result(&run(&[
        "pdf", "--k", "6", "--mb", "1.5", "--mf", "1", "--g", "0.5", "--out", csv.to_str().unwrap(),
    ]));
    assert!(r["momentum_sum_residual"].as_f64().unwrap().abs() < 1e-8);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("n,x,f_f,f_a,f_b\n"));
    assert_eq!(text.lines().count(), 7);
    let side: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("p.csv.json")).unwrap()).unwrap();
    assert_eq!(side["result"]["kept_fraction"], 1.0);
}

#[test]
fn output_is_deterministic() {
    let args = ["spectrum", "--k", "9", "--mb", "1.3", "--mf", "0.7", "--g", "0.9", "--solver", "lanczos"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}

#[test]
fn errors_are_json_with_exit_codes() {
    let out = run(&["ham", "--k", "0", "--g", "1", "--mb", "1", "--mf", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).lines().last().unwrap()).unwrap();
    assert_eq!(err["error"]["kind"], "invalid-argument");

    let out = run(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["spectrum", "--k", "4", "--mb", "1", "--mf", "1", "--g", "1", "--lambda", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_check_passes() {
    let r = result(&run(&["oracle-check", "--k", "6"]));
    assert_eq!(r["passed"], true);
    assert_eq!(r["report"]["mismatch_count"], 0);
}
