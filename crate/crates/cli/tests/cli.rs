use std::path::Path;
use std::process::{Command, Output};

fn holecover(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_holecover"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn bounds_prints_json() {
    let out = holecover(&["bounds"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for k in ["r1", "r2", "min", "max", "min_int", "max_int"] {
        assert!(v.get(k).is_some(), "missing {k}");
    }
    assert!(v["min"].as_f64().unwrap() <= v["max"].as_f64().unwrap());
}

#[test]
fn full_scale_bounds() {
    let cfg = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../configs/full_scale.json"
    );
    let out = holecover(&["bounds", "--config", cfg]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["min_int"], 3);
    assert_eq!(v["max_int"], 79);
}

#[test]
fn simulate_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = holecover(&[
        "simulate",
        "--trials",
        "3",
        "--seed",
        "5",
        "--method",
        "proposed",
        "--mode",
        "offline",
        "--workers",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let metrics = std::fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 4);
    assert!(metrics
        .lines()
        .skip(1)
        .all(|l| l.contains(",proposed,offline,")));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["trials"], 3);
    assert_eq!(summary["seed"], 5);
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<String> = ["1", "4"]
        .iter()
        .map(|w| {
            let d = dir.path().join(format!("w{w}"));
            let out = holecover(&[
                "simulate",
                "--trials",
                "6",
                "--workers",
                w,
                "--out",
                d.to_str().unwrap(),
            ]);
            assert_eq!(out.status.code(), Some(0));
            std::fs::read_to_string(d.join("metrics.csv")).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"trails": 3}"#);
    let out = holecover(&[
        "simulate",
        "--config",
        &bad,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trails"));

    let invalid = write(
        dir.path(),
        "invalid.json",
        r#"{"bs_failure_fraction": 2.0}"#,
    );
    assert_eq!(
        holecover(&["bounds", "--config", &invalid]).status.code(),
        Some(2)
    );
    let missing = dir.path().join("nope.json");
    assert_eq!(
        holecover(&["bounds", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn runtime_faults_exit_three() {
    // The output path is an existing file, so the directory cannot be made.
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "taken", "x");
    let out = holecover(&["simulate", "--trials", "1", "--out", &file]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn study_order_lists_every_policy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../configs/desk_sparse.json"
    );
    let out = holecover(&[
        "study-order",
        "--config",
        cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "policy,config1_units,config2_units,abs_count,coverage_after,path_length"
    );
    assert_eq!(lines.count(), 5);
    assert!(dir.path().join("order_study.csv").exists());
}
