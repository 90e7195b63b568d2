use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_yellowcast"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

#[test]
fn oracle_succeeds_and_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["oracle"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("oracle.json")).unwrap()).unwrap();
    assert!(v["bn"]["max_abs_error"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn missing_data_is_an_ingestion_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "train-bn",
            "--data",
            dir.path().join("nope").to_str().unwrap(),
        ],
    );
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn bad_config_values_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"scenario": {"yellow_duration": -1.0}}"#).unwrap();
    let o = run(dir.path(), &["--config", cfg.to_str().unwrap(), "simulate"]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"scenery": {}}"#).unwrap();
    let o = run(dir.path(), &["--config", cfg.to_str().unwrap(), "simulate"]);
    assert_eq!(o.status.code(), Some(2));
}
