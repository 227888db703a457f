//! Offline labeled pair sets: generation and on-disk layout.
//!
//! A pair set directory holds two TUDataset corpora, `queries` and `data`,
//! the pair list `pairs.csv` (`query_graph_index,data_graph_index,label`)
//! and a JSON sidecar describing how the set was produced.

use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphDataset, LabeledGraph};
use crate::oracle::PairLabel;
use crate::sampler::{child_rng, sample_data_graph, sample_negative_from, sample_positive, SamplerConfig};
use crate::tudataset::{load_tu_dataset_with, write_tu_dataset, LoadOptions};

pub const PAIRS_FILE: &str = "pairs.csv";
pub const SIDECAR_FILE: &str = "provenance.json";
pub const QUERIES_NAME: &str = "queries";
pub const DATA_NAME: &str = "data";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairRecord {
    pub query: usize,
    pub data: usize,
    pub label: PairLabel,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    query_graph_index: usize,
    data_graph_index: usize,
    label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    pub queries: Vec<LabeledGraph>,
    pub data: Vec<LabeledGraph>,
    pub pairs: Vec<PairRecord>,
    /// Original label value of each dense label id.
    pub label_values: Vec<i64>,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn label_alphabet_size(&self) -> usize {
        self.label_values.len()
    }

    pub fn pair(&self, i: usize) -> (&LabeledGraph, &LabeledGraph, PairLabel) {
        let r = self.pairs[i];
        (&self.queries[r.query], &self.data[r.data], r.label)
    }

    pub fn count(&self, label: PairLabel) -> usize {
        self.pairs.iter().filter(|p| p.label == label).count()
    }

    /// Writes the set into `dir` (created if needed). `sidecar` is stored
    /// verbatim as pretty JSON.
    pub fn write(&self, dir: &Path, sidecar: &serde_json::Value) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, graphs) in [(QUERIES_NAME, &self.queries), (DATA_NAME, &self.data)] {
            let ds = GraphDataset::new(name, graphs.clone(), self.label_values.clone())?;
            write_tu_dataset(&ds, dir)?;
        }
        let path = dir.join(PAIRS_FILE);
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
        for p in &self.pairs {
            w.serialize(CsvRow {
                query_graph_index: p.query,
                data_graph_index: p.data,
                label: p.label.to_string(),
            })
            .map_err(|e| csv_error(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        let path = dir.join(SIDECAR_FILE);
        let mut text = serde_json::to_string_pretty(sidecar)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<PairSet> {
        let queries = load_tu_dataset_with(dir, QUERIES_NAME, LoadOptions::keep_all())?;
        let data = load_tu_dataset_with(dir, DATA_NAME, LoadOptions::keep_all())?;
        if queries.label_values != data.label_values {
            return Err(Error::format(dir, "query and data corpora use different label alphabets"));
        }
        let path = dir.join(PAIRS_FILE);
        let mut r = csv::Reader::from_path(&path).map_err(|e| csv_error(&path, e))?;
        let mut pairs = Vec::new();
        for row in r.deserialize::<CsvRow>() {
            let row = row.map_err(|e| csv_error(&path, e))?;
            if row.query_graph_index >= queries.len() || row.data_graph_index >= data.len() {
                return Err(Error::format(
                    &path,
                    format!(
                        "pair ({}, {}) references a missing graph",
                        row.query_graph_index, row.data_graph_index
                    ),
                ));
            }
            pairs.push(PairRecord {
                query: row.query_graph_index,
                data: row.data_graph_index,
                label: row.label.parse().map_err(|_| {
                    Error::format(&path, format!("bad label {:?}", row.label))
                })?,
            });
        }
        Ok(PairSet {
            queries: queries.graphs,
            data: data.graphs,
            pairs,
            label_values: queries.label_values,
        })
    }

    /// Reads only the sidecar of a pair set directory.
    pub fn read_sidecar(dir: &Path) -> Result<serde_json::Value> {
        let path = dir.join(SIDECAR_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::format(path, e.to_string())
}

/// Draws `count` labeled pairs from graphs `pool` of `corpus`, alternating
/// positive and negative slots; each pair has its own data graph. Negative
/// slots that exhaust the retry cap are skipped. Errors when more than half
/// of the negative slots fail.
pub fn sample_pair_set(
    corpus: &GraphDataset,
    pool: &[usize],
    count: usize,
    cfg: &SamplerConfig,
    seed: u64,
) -> Result<PairSet> {
    cfg.validate()?;
    if pool.is_empty() {
        return Err(Error::arg("empty graph pool"));
    }
    let graphs = &corpus.graphs;
    let drawn: Vec<Option<(LabeledGraph, LabeledGraph, bool)>> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = child_rng(seed, i);
            let src = pool[rng.random_range(0..pool.len())];
            let d = sample_data_graph(&graphs[src], cfg, &mut rng)?;
            if i % 2 == 0 {
                let q = sample_positive(&d, cfg, &mut rng)?;
                Ok(Some((q, d, true)))
            } else {
                let sources: Vec<usize> = pool.iter().copied().filter(|&j| j != src).collect();
                let q = sample_negative_from(&d, graphs, &sources, cfg, &mut rng)?;
                Ok(q.map(|q| (q, d, false)))
            }
        })
        .collect::<Result<_>>()?;
    let negative_slots = count / 2;
    let failures = drawn.iter().filter(|x| x.is_none()).count();
    if failures > 0 {
        log::warn!("{failures} of {negative_slots} negative slots found no negative");
    }
    if negative_slots > 0 && failures * 2 > negative_slots {
        return Err(Error::Training(format!(
            "{failures} of {negative_slots} negative slots failed; corpus too homogeneous"
        )));
    }
    let mut set = PairSet {
        queries: Vec::new(),
        data: Vec::new(),
        pairs: Vec::new(),
        label_values: corpus.label_values.clone(),
    };
    for (q, d, positive) in drawn.into_iter().flatten() {
        set.pairs.push(PairRecord {
            query: set.queries.len(),
            data: set.data.len(),
            label: if positive { PairLabel::Positive } else { PairLabel::Negative },
        });
        set.queries.push(q);
        set.data.push(d);
    }
    Ok(set)
}
