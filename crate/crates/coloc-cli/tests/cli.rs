//! End-to-end checks of the `coloc` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coloc"))
}

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("coloc-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn validate_accepts_shipped_scenarios() {
    for name in ["default.toml", "lossy.toml"] {
        let out = bin()
            .args(["validate", "--scenario"])
            .arg(scenarios_dir().join(name))
            .output()
            .unwrap();
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok:"));
    }
}

#[test]
fn validate_rejects_broken_config() {
    let dir = tempdir("broken");
    let path = dir.join("bad.toml");
    let text = fs::read_to_string(scenarios_dir().join("default.toml"))
        .unwrap()
        .replace("dt = 0.166", "dt = -1.0");
    fs::write(&path, text).unwrap();
    let out = bin().args(["validate", "--scenario"]).arg(&path).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("time.dt"), "missing field path in: {err}");
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn simulate_is_reproducible_and_metrics_rederive() {
    let scenario = scenarios_dir().join("default.toml");
    let run = |dir: &Path| {
        let out = bin()
            .args(["simulate", "--scenario"])
            .arg(&scenario)
            .args(["--out"])
            .arg(dir)
            .args(["--trials", "2", "--methods", "dr,dcl"])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    let dir_a = tempdir("sim-a");
    let dir_b = tempdir("sim-b");
    run(&dir_a);
    run(&dir_b);

    // Byte-identical outputs across runs of the same seed.
    for rel in [
        "report.json",
        "trial_000/dr_robot1.csv",
        "trial_000/dcl_robot2.csv",
        "trial_001/dcl_robot1.csv",
    ] {
        let a = fs::read(dir_a.join(rel)).unwrap();
        let b = fs::read(dir_b.join(rel)).unwrap();
        assert_eq!(a, b, "{rel} differs between identical runs");
    }

    // The metrics subcommand rebuilds matching statistics from the logs.
    let out = bin().args(["metrics", "--in"]).arg(&dir_a).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rederived: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir_a.join("report_from_logs.json")).unwrap())
            .unwrap();
    let original: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir_a.join("report.json")).unwrap()).unwrap();
    let rmse = |v: &serde_json::Value, method: &str| -> f64 {
        v["methods"]
            .as_array()
            .unwrap()
            .iter()
            .find(|m| m["method"] == method)
            .unwrap()["robots"][0]["rmse_x"]
            .as_f64()
            .unwrap()
    };
    for method in ["dr", "dcl"] {
        let a = rmse(&original, method);
        let b = rmse(&rederived, method);
        assert!(
            (a - b).abs() < 1e-6,
            "{method}: rederived rmse {b} far from original {a}"
        );
    }

    fs::remove_dir_all(&dir_a).unwrap();
    fs::remove_dir_all(&dir_b).unwrap();
}
