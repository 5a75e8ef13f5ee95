use std::path::Path;
use std::process::{Command, Output};

fn dhsp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dhsp")).args(args).output().expect("binary runs")
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn table1_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for p in [&a, &b] {
        let out = dhsp(&["table1", "--budgets", "3^1..3^3", "--trials", "10", "--seed", "5", "--out", p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let text = read(&a);
    assert_eq!(text, read(&b));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("budget,trials,mean,stddev,queries,seconds"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "3");
    assert_eq!(first[4], "30");
    assert_eq!(text.lines().count(), 4);

    let fit = dhsp(&["scaling", "--in", a.to_str().unwrap()]);
    assert_eq!(fit.status.code(), Some(0), "{}", String::from_utf8_lossy(&fit.stderr));
    assert!(String::from_utf8_lossy(&fit.stdout).contains("\"slope\""));
}

#[test]
fn json_output_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"trials": 3, "seed": 9, "format": "json", "budgets": [2, 4]}"#).unwrap();
    let out = dhsp(&["--config", cfg.to_str().unwrap(), "table1"]);
    assert_eq!(out.status.code(), Some(0));
    let rows: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
    assert_eq!(rows[0]["trials"], 3);
    // flags override the file
    let out = dhsp(&["--config", cfg.to_str().unwrap(), "table1", "--trials", "2", "--format", "csv"]);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("budget,"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("\n2,2,"));
}

#[test]
fn simulate_succeeds() {
    let out = dhsp(&["simulate", "--algorithm", "general", "--N", "45", "--trials", "3", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = dhsp(&["simulate", "--algorithm", "staged", "--n", "6", "--trials", "3", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let rows: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rows[0]["mean"], 1.0);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(dhsp(&["bogus"]).status.code(), Some(2));
    assert_eq!(dhsp(&["table1", "--budgets", "3^2..2^5"]).status.code(), Some(2));
    assert_eq!(dhsp(&["table1", "--trials", "0"]).status.code(), Some(2));
    assert_eq!(dhsp(&["simulate", "--algorithm", "general"]).status.code(), Some(2));
    assert_eq!(dhsp(&["scaling", "--in", "/nonexistent/rows.csv"]).status.code(), Some(2));
}

#[test]
fn verify_exit_codes() {
    let ok = dhsp(&["verify", "--nmax", "6", "--samples", "20000"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    let bad = dhsp(&["verify", "--nmax", "6", "--samples", "20000", "--sign-flip"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("FAIL residual_fidelity"));
    let bad = dhsp(&["verify", "--nmax", "6", "--samples", "20000", "--combine-bias", "0.6"]);
    assert_eq!(bad.status.code(), Some(1));
}
