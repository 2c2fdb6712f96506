use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn hodgelab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hodgelab"))
        .arg("--output-dir")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_shipped_interval_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = hodgelab(dir.path(), &["validate", path(&fixture("interval_8.json"))]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("[1, 0]"));
}

#[test]
fn study_writes_four_rows_and_is_reproducible() {
    let cfg = fixture("study_interval_linear.json");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = hodgelab(d.path(), &["study", path(&cfg), "--seed", "3"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv = std::fs::read(a.path().join("interval_linear.csv")).unwrap();
    assert_eq!(String::from_utf8_lossy(&csv).lines().count(), 5);
    assert_eq!(csv, std::fs::read(b.path().join("interval_linear.csv")).unwrap());
    assert!(a.path().join("interval_linear_manifest.json").exists());
}

#[test]
fn tightened_rate_assertion_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(fixture("study_interval_linear.json")).unwrap();
    let mut cfg: serde_json::Value = serde_json::from_str(&text).unwrap();
    for r in cfg["rates"].as_array_mut().unwrap() {
        r["tolerance"] = serde_json::json!(0.0001);
    }
    let p = dir.path().join("tight.json");
    std::fs::write(&p, cfg.to_string()).unwrap();
    let o = hodgelab(dir.path(), &["study", path(&p)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(hodgelab(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(hodgelab(dir.path(), &["hodge", "x.json"]).status.code(), Some(2));
}

#[test]
fn unreadable_config_exits_one_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let o = hodgelab(dir.path(), &["study", "does_not_exist.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn hodge_decomposition_of_cycle_vector() {
    let dir = tempfile::tempdir().unwrap();
    let o = hodgelab(
        dir.path(),
        &["hodge", path(&fixture("cycle_8.json")), "--degree", "1", "--vector", path(&fixture("cycle_8_vector.json"))],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["harmonic"].as_array().unwrap().len(), 8);
}

#[test]
fn exported_complex_validates() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("sq.json");
    let o = hodgelab(dir.path(), &["export", "square", "3", path(&p)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = hodgelab(dir.path(), &["validate", path(&p)]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn crime_sweep_writes_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = hodgelab(dir.path(), &["crime", path(&fixture("crime_interval.json"))]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.iter().any(|n| n.ends_with("_crime.csv")), "{names:?}");
    assert!(names.iter().any(|n| n.ends_with("_projection.csv")), "{names:?}");
}
