mod common;

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_skillpriv"))
}

#[test]
fn analyze_exit_codes_follow_the_verdict() {
    let status = |f: &str| bin().args(["analyze", common::fixture(f).to_str().unwrap()]).output().unwrap();
    let over = status("deep-work");
    assert_eq!(over.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_slice(&over.stdout).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["skill_verdict"], true);
    assert_eq!(status("benign-notes").status.code(), Some(0));
    assert_eq!(bin().args(["analyze", "/nonexistent"]).output().unwrap().status.code(), Some(1));
}

#[test]
fn constrain_writes_a_bundle_that_analyzes_clean() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("constrained");
    let graph = dir.path().join("graph.json");
    let st = bin()
        .args(["constrain", common::fixture("deep-work").to_str().unwrap(), "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(2));
    assert!(out.join("constraints.json").exists());
    let again = bin()
        .args(["analyze", out.to_str().unwrap(), "--graph-out", graph.to_str().unwrap(), "--seed", "3"])
        .output()
        .unwrap();
    assert_eq!(again.status.code(), Some(0));
    assert!(skillpriv::graph::UnifiedGraph::from_json(&std::fs::read_to_string(graph).unwrap()).is_ok());
}

#[test]
fn stats_stratified_prints_the_interval() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("row.json");
    std::fs::write(&input, r#"{"N_I":5541,"N_C":1498,"n_I":200,"n_C":100,"h_I":189,"h_C":93}"#).unwrap();
    let out = bin().args(["stats", "stratified", "--input", input.to_str().unwrap()]).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("94.18% [91.48%, 96.89%]"));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 5\nmax_chains = 1\n").unwrap();
    let report = dir.path().join("r.json");
    let st = bin()
        .args(["analyze", common::fixture("repo-assistant").to_str().unwrap(), "--config", cfg.to_str().unwrap()])
        .args(["--report", report.to_str().unwrap(), "--max-depth", "64"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert!(r["chains"]["chains"].as_u64().unwrap() <= 3);
    std::fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let bad = bin().args(["analyze", common::fixture("deep-work").to_str().unwrap(), "--config", cfg.to_str().unwrap()]).status().unwrap();
    assert_eq!(bad.code(), Some(1));
}

#[test]
fn batch_writes_one_report_per_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let st = bin()
        .args(["batch", common::fixture("").to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--jobs", "2"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
    let n = std::fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(n, common::FIXTURES.len());
}
