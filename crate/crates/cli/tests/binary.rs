//! Runs the compiled `submatch` binary.

use std::path::Path;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use submatch_core::tudataset::write_tu_dataset;
use submatch_core::{GraphDataset, LabeledGraph};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_submatch"))
}

fn clique(n: usize) -> LabeledGraph {
    let edges: Vec<_> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    LabeledGraph::from_edges(vec![0; n], &edges).unwrap()
}

fn write_fixture(dir: &Path) {
    let triangle = clique(3);
    let path = LabeledGraph::from_edges(vec![0; 3], &[(0, 1), (1, 2)]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut edges = Vec::new();
    for u in 0..100 {
        for v in u + 1..100 {
            if rng.random_bool(0.5) {
                edges.push((u, v));
            }
        }
    }
    let dense = LabeledGraph::from_edges(vec![0; 100], &edges).unwrap();
    let ds = GraphDataset::with_identity_labels("G", vec![triangle, path, dense, clique(20)], 1).unwrap();
    write_tu_dataset(&ds, dir).unwrap();
}

fn oracle_status(dir: &Path, q: usize, d: usize, extra: &[&str]) -> (i32, String) {
    let out = bin()
        .arg("oracle")
        .arg(format!("{}/G@{q}", dir.display()))
        .arg(format!("{}/G@{d}", dir.display()))
        .args(extra)
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn oracle_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    let (code, text) = oracle_status(dir.path(), 1, 0, &[]);
    assert_eq!(code, 0, "{text}");
    assert!(text.starts_with("match 0->"), "{text}");
    assert_eq!(oracle_status(dir.path(), 0, 1, &[]).0, 1);
    // a 20-clique passes every cheap filter against a dense random graph
    assert_eq!(oracle_status(dir.path(), 3, 2, &["--timeout-ms", "5"]).0, 2);
    assert_eq!(oracle_status(dir.path(), 9, 0, &[]).0, 3);
    let out = bin().args(["oracle", "missing/G@0", "missing/G@1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"train": {"learning_rate": 1}}"#).unwrap();
    let out = bin()
        .args(["sample", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rate"));
}

#[test]
fn sample_via_binary_writes_versioned_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"dataset": {"synthetic": {"num_graphs": 20, "node_range": [10, 14]}},
            "sampler": {"data_walk_range": [5, 9]},
            "eval": {"val_pairs": 10, "test_pairs": 10}}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("data");
    let status = bin()
        .args(["sample", "--seed", "5", "--threads", "1", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert!(status.success());
    let split: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("split.json")).unwrap()).unwrap();
    assert!(split["version"].as_str().unwrap().starts_with("submatch "));
    assert_eq!(split["config"]["seed"], 5);
    assert_eq!(split["config"]["train"]["seed"], 5);
    assert!(out_dir.join("val/pairs.csv").exists());
    assert!(out_dir.join("test/data_A.txt").exists());
}
