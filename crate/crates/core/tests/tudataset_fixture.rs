use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use submatch_core::tudataset::{load_tu_dataset, write_tu_dataset};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/three")
}

/// Nodes per graph id, counted straight from the indicator file.
fn indicator_counts(dir: &Path) -> BTreeMap<usize, usize> {
    let text = fs::read_to_string(dir.join("THREE_graph_indicator.txt")).unwrap();
    let mut counts = BTreeMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        *counts.entry(line.trim().parse::<usize>().unwrap()).or_insert(0) += 1;
    }
    counts
}

#[test]
fn fixture_counts_match_indicator_file() {
    let ds = load_tu_dataset(&fixture(), "THREE").unwrap();
    let counts: Vec<usize> = indicator_counts(&fixture()).into_values().collect();
    let loaded: Vec<usize> = ds.graphs.iter().map(|g| g.node_count()).collect();
    assert_eq!(loaded, counts);
    assert_eq!(ds.graphs.iter().map(|g| g.edge_count()).collect::<Vec<_>>(), vec![3, 3, 4]);
    assert_eq!(ds.label_values, vec![5, 7, 9]);
    assert_eq!(ds.graphs[1].labels(), &[1, 2, 0, 0]);
}

#[test]
fn fixture_round_trips() {
    let ds = load_tu_dataset(&fixture(), "THREE").unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_tu_dataset(&ds, dir.path()).unwrap();
    assert_eq!(load_tu_dataset(dir.path(), "THREE").unwrap(), ds);
}

#[test]
fn truncated_label_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for f in ["THREE_A.txt", "THREE_graph_indicator.txt"] {
        fs::copy(fixture().join(f), dir.path().join(f)).unwrap();
    }
    fs::write(dir.path().join("THREE_node_labels.txt"), "5\n5\n").unwrap();
    assert!(load_tu_dataset(dir.path(), "THREE").is_err());
}
