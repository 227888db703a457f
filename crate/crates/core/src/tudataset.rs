//! Reader and writer for the TUDataset text layout.
//!
//! A corpus named `NAME` in directory `DIR` consists of
//!
//! * `NAME_A.txt`: one `i, j` line per edge, 1-based global node ids;
//! * `NAME_graph_indicator.txt`: the 1-based graph id of each node, one per line;
//! * `NAME_node_labels.txt`: one integer label per node line.
//!
//! Labels are densified to `0..|alphabet|` in ascending value order. The writer
//! additionally emits `NAME_label_alphabet.txt` (original label values in dense
//! order) and the reader honors it when present, so corpora that only use part
//! of an alphabet reload with the same dense ids.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::graph::{GraphDataset, LabeledGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    /// Connected components with fewer nodes are dropped.
    pub min_component_size: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            min_component_size: 3,
        }
    }
}

impl LoadOptions {
    /// Keep every component, including isolated nodes.
    pub fn keep_all() -> Self {
        LoadOptions {
            min_component_size: 1,
        }
    }
}

fn corpus_file(dir: &Path, name: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{name}_{suffix}.txt"))
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty())
        .collect())
}

fn parse_int<T: std::str::FromStr>(path: &Path, lineno: usize, field: &str) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::format(path, format!("line {lineno}: cannot parse {field:?}")))
}

/// Loads a TUDataset-format corpus, splitting disconnected graphs into
/// components and keeping those with at least `min_component_size` nodes.
pub fn load_tu_dataset(dir: &Path, name: &str) -> Result<GraphDataset> {
    load_tu_dataset_with(dir, name, LoadOptions::default())
}

pub fn load_tu_dataset_with(dir: &Path, name: &str, opts: LoadOptions) -> Result<GraphDataset> {
    let ind_path = corpus_file(dir, name, "graph_indicator");
    let lab_path = corpus_file(dir, name, "node_labels");
    let adj_path = corpus_file(dir, name, "A");

    let mut graph_of = Vec::new();
    let mut prev = 0usize;
    for (lineno, line) in read_lines(&ind_path)? {
        let g: usize = parse_int(&ind_path, lineno, &line)?;
        let ok = if prev == 0 { g == 1 } else { g == prev || g == prev + 1 };
        if !ok {
            return Err(Error::format(
                &ind_path,
                format!("line {lineno}: graph id {g} after {prev} is not contiguous and non-decreasing"),
            ));
        }
        prev = g;
        graph_of.push(g - 1);
    }
    let total_nodes = graph_of.len();
    let graph_total = prev;

    let raw_labels: Vec<i64> = read_lines(&lab_path)?
        .into_iter()
        .map(|(lineno, line)| {
            // Some corpora carry several label columns; the first is the node label.
            let first = line.split(',').next().unwrap_or("");
            parse_int(&lab_path, lineno, first)
        })
        .collect::<Result<_>>()?;
    if raw_labels.len() != total_nodes {
        return Err(Error::format(
            &lab_path,
            format!(
                "{} labels for {} nodes in the graph indicator",
                raw_labels.len(),
                total_nodes
            ),
        ));
    }

    let alpha_path = corpus_file(dir, name, "label_alphabet");
    let label_values: Vec<i64> = if alpha_path.exists() {
        read_lines(&alpha_path)?
            .into_iter()
            .map(|(lineno, line)| parse_int(&alpha_path, lineno, &line))
            .collect::<Result<_>>()?
    } else {
        let mut v = raw_labels.clone();
        v.sort_unstable();
        v.dedup();
        v
    };
    let dense: BTreeMap<i64, u32> = label_values
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, i as u32))
        .collect();
    if dense.len() != label_values.len() {
        return Err(Error::format(&alpha_path, "duplicate label value"));
    }

    // node ranges per graph
    let mut first_node = vec![0usize; graph_total + 1];
    for &g in &graph_of {
        first_node[g + 1] += 1;
    }
    for g in 0..graph_total {
        first_node[g + 1] += first_node[g];
    }

    let mut edges_per_graph: Vec<Vec<(usize, usize)>> = vec![Vec::new(); graph_total];
    for (lineno, line) in read_lines(&adj_path)? {
        let mut parts = line.split(',');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::format(&adj_path, format!("line {lineno}: expected \"i, j\"")));
        };
        let a: usize = parse_int(&adj_path, lineno, a)?;
        let b: usize = parse_int(&adj_path, lineno, b)?;
        if a == 0 || b == 0 || a > total_nodes || b > total_nodes {
            return Err(Error::format(
                &adj_path,
                format!("line {lineno}: node id out of range 1..={total_nodes}"),
            ));
        }
        let (a, b) = (a - 1, b - 1);
        let g = graph_of[a];
        if graph_of[b] != g {
            return Err(Error::format(
                &adj_path,
                format!("line {lineno}: edge joins graphs {} and {}", g + 1, graph_of[b] + 1),
            ));
        }
        if a == b {
            log::warn!("{}: dropping self-loop on node {}", adj_path.display(), a + 1);
            continue;
        }
        edges_per_graph[g].push((a - first_node[g], b - first_node[g]));
    }

    let mut graphs = Vec::new();
    for (g, edges) in edges_per_graph.iter().enumerate() {
        let labels: Vec<u32> = (first_node[g]..first_node[g + 1])
            .map(|v| {
                dense.get(&raw_labels[v]).copied().ok_or_else(|| {
                    Error::format(
                        &alpha_path,
                        format!("label {} missing from the alphabet", raw_labels[v]),
                    )
                })
            })
            .collect::<Result<_>>()?;
        let raw = LabeledGraph::from_edges(labels, edges)?;
        let components = raw.connected_components();
        if components.len() == 1 {
            if raw.node_count() >= opts.min_component_size {
                graphs.push(raw);
            }
            continue;
        }
        for comp in components {
            if comp.len() >= opts.min_component_size {
                graphs.push(raw.induced_subgraph(&comp)?);
            }
        }
    }

    GraphDataset::new(name, graphs, label_values)
}

/// Writes `ds` under `dir` using `ds.name` as the file prefix.
pub fn write_tu_dataset(ds: &GraphDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut a = String::new();
    let mut ind = String::new();
    let mut lab = String::new();
    let mut base = 0usize;
    for (gi, g) in ds.graphs.iter().enumerate() {
        for v in 0..g.node_count() {
            ind.push_str(&format!("{}\n", gi + 1));
            lab.push_str(&format!("{}\n", ds.label_values[g.label(v) as usize]));
        }
        // Both orientations, as in the published corpora.
        for u in 0..g.node_count() {
            for &w in g.neighbors(u) {
                a.push_str(&format!("{}, {}\n", base + u + 1, base + w as usize + 1));
            }
        }
        base += g.node_count();
    }
    let alphabet: String = ds.label_values.iter().map(|v| format!("{v}\n")).collect();
    for (suffix, body) in [
        ("A", a),
        ("graph_indicator", ind),
        ("node_labels", lab),
        ("label_alphabet", alphabet),
    ] {
        let path = corpus_file(dir, &ds.name, suffix);
        let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        f.write_all(body.as_bytes()).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
