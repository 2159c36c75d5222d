//! Command-line behavior: exit codes, stdout tables and written bundles.

use std::fs;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cointkit")).args(args).output().unwrap()
}

#[test]
fn descstats_prints_tsv_to_stdout() {
    let out = run(&["descstats"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("GDPD"));
    assert!(text.lines().any(|l| l.contains('\t')));
}

#[test]
fn malformed_data_exits_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "year,GDPD\n1990,0.02\nnineteen,0.03\n").unwrap();
    let out = run(&["--data", path.to_str().unwrap(), "descstats"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}

#[test]
fn percent_data_needs_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pct.csv");
    let rows: String = (1980..2000).map(|y| format!("{y},{}\n", 2.0 + (y % 3) as f64)).collect();
    fs::write(&path, format!("year,CPI\n{rows}")).unwrap();
    let p = path.to_str().unwrap();
    assert_eq!(run(&["--data", p, "descstats"]).status.code(), Some(1));
    assert!(run(&["--data", p, "--percent-input", "descstats"]).status.success());
}

#[test]
fn vecm_rank_outside_range_is_rejected() {
    let out = run(&["vecm", "--rank", "0"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["vecm", "--rank", "3"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_preset_is_rejected() {
    let out = run(&["--preset", "nope", "cumfit"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn structured_bundle_has_report_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--format", "structured", "--out", dir.path().to_str().unwrap(), "johansen", "--max-lag", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert!(report["tables"].as_array().is_some_and(|t| !t.is_empty()));
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["command"], "johansen");
    assert_eq!(meta["config_hash"].as_str().map(str::len), Some(64));
    assert_eq!(meta["data_sha256"].as_str().map(str::len), Some(64));
}

#[test]
fn calibrate_is_reproducible_for_a_seed() {
    let args = ["--seed", "9", "calibrate", "--test", "adf", "--reps", "500", "--length", "80"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}
