use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use i2l_core::harness::{run_experiment, ExperimentConfig, MetricsReport};
use serde_json::{json, Value};

const STAGES: [&str; 5] = ["simulate", "features", "train", "evaluate", "report"];

fn small_config() -> Value {
    json!({
        "seed": 7,
        "policy": {"kind": "fully-imitable"},
        "representation": {"kind": "rule-features"},
        "train_topologies": ["C"],
        "test_topologies": ["C", "A"],
        "episodes_per_topology": 6,
        "steps_per_episode": 300,
        "dataset_size": 1000,
        "test_episodes": 1,
        "prune_levels": [2],
        "deploy": {"episodes": 2, "max_steps": 100}
    })
}

fn write_config(dir: &Path, cfg: &Value) -> PathBuf {
    let path = dir.join("cfg.json");
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn i2l(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_i2l"));
    cmd.args(args).env_remove("I2L_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stage(name: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![name, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    i2l(&args, &[])
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_all(config: &Path, out: &Path) {
    for s in STAGES {
        let o = stage(s, config, out, &[]);
        assert!(o.status.success(), "{s} failed: {}", stderr(&o));
    }
}

/// Every file under `dir` except the manifest, keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else if path.file_name().unwrap() != "manifest.json" {
                out.insert(path.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn manifest_without_timestamps(dir: &Path) -> Value {
    let mut m: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    for s in m["stages"].as_object_mut().unwrap().values_mut() {
        let s = s.as_object_mut().unwrap();
        s.remove("started_unix");
        s.remove("finished_unix");
    }
    m
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn pipeline_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config());
    let out = dir.path().join("run");
    run_all(&config, &out);

    let trees = std::fs::read_dir(out.join("trees")).unwrap().count();
    assert!(trees >= 2);
    assert_eq!(csv_rows(&out.join("curve.csv")).len(), trees);

    let report = MetricsReport::from_json(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let tree_rows = csv_rows(&out.join("report.csv"))
        .into_iter()
        .filter(|r| report.trees.iter().any(|t| t.name == r[0]))
        .count();
    assert_eq!(tree_rows, report.trees.len() * 2);

    // The target never fails on its own topologies here, so it reports the full budget.
    for m in report.topologies.iter().filter(|m| m.controller == "target") {
        let d = m.deployment.unwrap();
        assert_eq!((d.collisions, d.stalls), (0, 0));
        assert_eq!(d.mtbf, 200.0);
    }

    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let stored = std::fs::read_to_string(out.join("config.json")).unwrap();
    assert_eq!(manifest["config_hash"], json!(hex_sha256(&stored)));
    assert_eq!(manifest["seed"], json!(7));
    assert_eq!(manifest["feature_count"], json!(6));
    for s in STAGES {
        for p in manifest["stages"][s]["outputs"].as_array().unwrap() {
            assert!(out.join(p.as_str().unwrap()).exists(), "{p}");
        }
    }
}

fn hex_sha256(text: &str) -> String {
    use sha2::Digest;
    hex::encode(sha2::Sha256::digest(text.as_bytes()))
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_all(&config, &a);
    let first = snapshot(&a);
    let first_manifest = manifest_without_timestamps(&a);
    run_all(&config, &a);
    assert_eq!(snapshot(&a), first);
    assert_eq!(manifest_without_timestamps(&a), first_manifest);
    for s in STAGES {
        let o = i2l(&[s, "--config", config.to_str().unwrap(), "--out", b.to_str().unwrap()], &[("I2L_THREADS", "1")]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(snapshot(&b), first);
}

#[test]
fn persisted_artifacts_reproduce_the_in_memory_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config());
    let out = dir.path().join("run");
    run_all(&config, &out);
    // Evaluation alone reads the dataset and tree files from disk.
    let o = stage("evaluate", &config, &out, &[]);
    assert!(o.status.success());
    let from_disk = MetricsReport::from_json(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let cfg = ExperimentConfig::load(&config).unwrap();
    assert_eq!(run_experiment(&cfg, dir.path()).unwrap().report, from_disk);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(stage("simulate", &config, &a, &[]).status.success());
    assert!(stage("simulate", &config, &b, &["--seed", "8"]).status.success());
    let stored: Value = serde_json::from_str(&std::fs::read_to_string(b.join("config.json")).unwrap()).unwrap();
    assert_eq!(stored["seed"], json!(8));
    assert_ne!(std::fs::read(a.join("episodes/train/00000.jsonl")).unwrap(), std::fs::read(b.join("episodes/train/00000.jsonl")).unwrap());
}

#[test]
fn egocentric_features_have_four_columns_per_neighbour() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config();
    cfg["representation"] = json!({"kind": "egocentric", "neighbours": 3});
    let config = write_config(dir.path(), &cfg);
    let out = dir.path().join("run");
    assert!(stage("features", &config, &out, &[]).status.success());
    let header = csv::Reader::from_path(out.join("dataset.csv")).unwrap().headers().unwrap().len();
    assert_eq!(header, 4 * 3 + 1);
}

#[test]
fn bad_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    for (field, value) in [("vehicles", json!("eleven")), ("steps_per_episode", json!(0)), ("split", json!({"train": 0.9, "val": 0.2, "test": 0.1}))] {
        let mut cfg = small_config();
        cfg[field] = value;
        let o = stage("simulate", &write_config(dir.path(), &cfg), &out, &[]);
        assert_eq!(o.status.code(), Some(2));
        assert!(stderr(&o).contains(field), "{field}: {}", stderr(&o));
    }
    let mut cfg = small_config();
    cfg.as_object_mut().unwrap().remove("seed");
    let o = stage("simulate", &write_config(dir.path(), &cfg), &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"));
}

#[test]
fn missing_inputs_fail_with_their_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let absent = dir.path().join("nowhere.json");
    let o = stage("simulate", &absent, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nowhere.json"));

    let mut cfg = small_config();
    cfg["train_topologies"] = json!(["tracks/missing-loop.json"]);
    let o = stage("simulate", &write_config(dir.path(), &cfg), &out, &[]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("missing-loop.json"), "{}", stderr(&o));
}

#[test]
fn config_and_runtime_errors_exit_differently() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config());
    let out = dir.path().join("run");
    let contradictory = stage("train", &config, &out, &["--depth", "4"]);
    assert_eq!(contradictory.status.code(), Some(2));
    assert!(stderr(&contradictory).contains("depth"));

    let no_trees = stage("evaluate", &config, &out, &[]);
    assert_eq!(no_trees.status.code(), Some(1), "{}", stderr(&no_trees));

    assert!(stage("train", &config, &out, &[]).status.success());
    std::fs::remove_file(out.join("trees/tree-000.json")).unwrap();
    let missing_tree = stage("evaluate", &config, &out, &[]);
    assert_eq!(missing_tree.status.code(), Some(1));
    assert!(stderr(&missing_tree).contains("tree-000.json"));

    let threads = i2l(&["simulate", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()], &[("I2L_THREADS", "0")]);
    assert_eq!(threads.status.code(), Some(2));
    assert!(stderr(&threads).contains("I2L_THREADS"));
}
