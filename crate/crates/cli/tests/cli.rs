//! End-to-end checks of the `dpfilter` binary: determinism of seeded runs,
//! config loading, and the reproduction report.

use std::path::Path;
use std::process::Command;

fn dpfilter() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dpfilter"))
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {path:?}: {e}"))
}

const TINY_AGGREGATE_TOML: &str = r#"
seed = 5
trials = 4
horizon = 50
participants = 2
filter_length = 3
bound = 1.0
noise = "gaussian"

[budget]
epsilon = 0.6931471805599453
delta = 0.05
"#;

#[test]
fn same_config_and_seed_give_byte_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("agg.toml");
    std::fs::write(&cfg, TINY_AGGREGATE_TOML).unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let status = dpfilter()
            .args(["aggregate", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(
        read(&out_a.join("summary.json")),
        read(&out_b.join("summary.json"))
    );
    assert_eq!(
        read(&out_a.join("trace_aggregate.csv")),
        read(&out_b.join("trace_aggregate.csv"))
    );
}

#[test]
fn seed_override_changes_samples_but_not_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("agg.toml");
    std::fs::write(&cfg, TINY_AGGREGATE_TOML).unwrap();
    let mut summaries = Vec::new();
    for seed in ["5", "6"] {
        let out = dir.path().join(seed);
        let status = dpfilter()
            .args(["aggregate", "--config"])
            .arg(&cfg)
            .args(["--seed", seed, "--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        let v: serde_json::Value =
            serde_json::from_str(&read(&out.join("summary.json"))).unwrap();
        summaries.push(v);
    }
    let record = |v: &serde_json::Value, name: &str, field: &str| -> f64 {
        v["records"]
            .as_array()
            .unwrap()
            .iter()
            .find(|r| r["name"] == name)
            .unwrap()[field]
            .as_f64()
            .unwrap()
    };
    for name in ["input_placement_mse", "output_placement_mse"] {
        assert_eq!(
            record(&summaries[0], name, "predicted"),
            record(&summaries[1], name, "predicted"),
            "{name}: predictions must not depend on the seed"
        );
        assert_ne!(
            record(&summaries[0], name, "empirical"),
            record(&summaries[1], name, "empirical"),
            "{name}: different seeds must draw different noise"
        );
    }
}

#[test]
fn toml_and_json_configs_resolve_to_the_same_hash() {
    let dir = tempfile::tempdir().unwrap();
    let toml_cfg = dir.path().join("agg.toml");
    std::fs::write(&toml_cfg, TINY_AGGREGATE_TOML).unwrap();
    let json_cfg = dir.path().join("agg.json");
    std::fs::write(
        &json_cfg,
        r#"{
            "seed": 5, "trials": 4, "horizon": 50,
            "budget": {"epsilon": 0.6931471805599453, "delta": 0.05},
            "participants": 2, "filter_length": 3, "bound": 1.0,
            "noise": "gaussian"
        }"#,
    )
    .unwrap();
    let mut hashes = Vec::new();
    for cfg in [&toml_cfg, &json_cfg] {
        let out = dir.path().join(cfg.file_stem().unwrap());
        let status = dpfilter()
            .args(["aggregate", "--config"])
            .arg(cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        let v: serde_json::Value =
            serde_json::from_str(&read(&out.join("summary.json"))).unwrap();
        hashes.push(v["config_hash"].as_str().unwrap().to_string());
    }
    assert_eq!(hashes[0], hashes[1]);
}

#[test]
fn zero_sensitivity_makes_empirical_equal_analytic_exactly() {
    // bound = 0 means zero noise everywhere: predicted and sampled MSE both
    // collapse to exactly zero
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("agg.toml");
    std::fs::write(
        &cfg,
        TINY_AGGREGATE_TOML
            .replace("bound = 1.0", "bound = 0.0")
            .replace("trials = 4", "trials = 1"),
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = dpfilter()
        .args(["aggregate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let v: serde_json::Value = serde_json::from_str(&read(&out.join("summary.json"))).unwrap();
    for r in v["records"].as_array().unwrap() {
        assert_eq!(r["predicted"].as_f64().unwrap(), 0.0, "{r}");
        assert_eq!(r["empirical"].as_f64().unwrap(), 0.0, "{r}");
    }
}

#[test]
fn invalid_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, TINY_AGGREGATE_TOML.replace("trials = 4", "trials = 0")).unwrap();
    let output = dpfilter()
        .args(["aggregate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("trials"), "stderr: {stderr}");
}

#[test]
fn reproduce_norms_suite_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("repro");
    let output = dpfilter()
        .args(["reproduce", "--suite", "norms", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success());
    let report = read(&out.join("report.md"));
    assert!(report.contains("| target | observed | tolerance | verdict |"));
    assert!(report.contains("gaussian multiplier"));
    assert!(report.contains("checks passed"));
    let summary: serde_json::Value =
        serde_json::from_str(&read(&out.join("summary.json"))).unwrap();
    assert_eq!(summary["scenario"], "reproduce");
}
