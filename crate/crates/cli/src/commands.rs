//! Subcommand implementations and their on-disk artifacts.
//!
//! JSON artifacts carry the effective configuration and [`VERSION`]; CSV
//! artifacts sit next to a JSON file that does. Wall-clock measurements go
//! to `timings.json` only, so every other artifact is a pure function of
//! the inputs and the seed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use submatch_core::checkpoint::{content_hash, Checkpoint};
use submatch_core::encoder::{encode_nodes, EncoderParams};
use submatch_core::index::NeighborhoodIndex;
use submatch_core::measure::node_pair_scores;
use submatch_core::metrics::{histogram, hit_at_k, summarize, Histogram, Summary, Threshold};
use submatch_core::oracle::{find_subgraph_isomorphism, OracleOutcome};
use submatch_core::pairs::{sample_pair_set, PairSet};
use submatch_core::sampler::{build_nested_chain, build_split, child_rng, Split};
use submatch_core::synthetic::random_corpus;
use submatch_core::trainer::{embed_graphs, evaluate, rank_queries, train_epoch, TrainData, TrainState};
use submatch_core::tudataset::{load_tu_dataset_with, write_tu_dataset, LoadOptions};
use submatch_core::{Error, GraphDataset, LabeledGraph, PairLabel, Result, ScoreMode, Verdict};

use crate::config::RunConfig;
use crate::graphref::GraphRef;
use crate::VERSION;

pub const CORPUS_DIR: &str = "corpus";
pub const CORPUS_NAME: &str = "corpus";
pub const SPLIT_FILE: &str = "split.json";
pub const VAL_DIR: &str = "val";
pub const TEST_DIR: &str = "test";

pub const MODEL_FILE: &str = "model.ckpt";
pub const MANIFEST_FILE: &str = "model.manifest";
pub const LAST_FILE: &str = "last.ckpt";
pub const BEST_FILE: &str = "best.ckpt";
pub const LOG_FILE: &str = "train_log.csv";
pub const TIMINGS_FILE: &str = "timings.json";

const VAL_STREAM: u64 = 1;
const TEST_STREAM: u64 = 2;
const RANK_STREAM: u64 = 3;

/// Seed of an independent sub-stream of the master seed.
fn stream_seed(seed: u64, stream: u64) -> u64 {
    child_rng(seed, stream).next_u64()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(io_err(path))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// `body` with `version` and `config` fields added.
fn envelope(cfg: &RunConfig, body: impl Serialize) -> Result<Value> {
    let mut v = serde_json::to_value(body)?;
    let obj = v
        .as_object_mut()
        .ok_or_else(|| Error::Argument("artifact body must be a JSON object".into()))?;
    obj.insert("version".into(), json!(VERSION));
    obj.insert("config".into(), serde_json::to_value(cfg)?);
    Ok(v)
}

fn write_timings(dir: &Path, timings: &BTreeMap<&str, f64>) -> Result<()> {
    write_json(&dir.join(TIMINGS_FILE), &json!({ "version": VERSION, "seconds": timings }))
}

/// The configured corpus: a TUDataset when one is named, the synthetic
/// generator otherwise.
pub fn load_corpus(cfg: &RunConfig) -> Result<GraphDataset> {
    match (&cfg.dataset.tu_dir, &cfg.dataset.tu_name) {
        (Some(dir), Some(name)) => load_tu_dataset_with(
            dir,
            name,
            LoadOptions {
                min_component_size: cfg.dataset.min_component_size,
            },
        ),
        _ => random_corpus(&cfg.dataset.synthetic),
    }
}

/// Rewrites dense label ids from alphabet `from` into alphabet `to`.
/// Errors when a used label value is missing from `to`.
pub fn conform_labels(graphs: Vec<LabeledGraph>, from: &[i64], to: &[i64]) -> Result<Vec<LabeledGraph>> {
    if from == to {
        return Ok(graphs);
    }
    let lookup: BTreeMap<i64, u32> = to.iter().enumerate().map(|(i, &v)| (v, i as u32)).collect();
    graphs
        .into_iter()
        .map(|g| {
            let labels = g
                .labels()
                .iter()
                .map(|&l| {
                    let value = from[l as usize];
                    lookup.get(&value).copied().ok_or_else(|| {
                        Error::Argument(format!("label {value} is not in the checkpoint's alphabet"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let edges: Vec<_> = g.edges().collect();
            LabeledGraph::from_edges(labels, &edges)
        })
        .collect()
}

/// A checkpoint together with the content hash of its file.
pub struct LoadedModel {
    pub checkpoint: Checkpoint,
    pub hash: String,
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(LoadedModel {
        checkpoint: Checkpoint::from_bytes(&bytes, path)?,
        hash: content_hash(&bytes),
    })
}

fn load_pairs_for(model: &LoadedModel, dir: &Path) -> Result<PairSet> {
    let mut set = PairSet::read(dir)?;
    let to = &model.checkpoint.label_values;
    set.queries = conform_labels(set.queries, &set.label_values, to)?;
    set.data = conform_labels(set.data, &set.label_values, to)?;
    set.label_values = to.clone();
    Ok(set)
}

// ---------------------------------------------------------------- sample

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub graphs: usize,
    pub labels: usize,
    pub split: Split,
    pub val_pairs: usize,
    pub test_pairs: usize,
}

/// Loads the corpus, splits it and draws the fixed validation and test
/// pair sets. Layout of `out`: `corpus/`, `split.json`, `val/`, `test/`.
pub fn sample(cfg: &RunConfig, out: &Path) -> Result<SampleSummary> {
    let start = Instant::now();
    let mut corpus = load_corpus(cfg)?;
    if corpus.is_empty() {
        return Err(Error::Argument("corpus has no graphs".into()));
    }
    corpus.name = CORPUS_NAME.into();
    let split = build_split(corpus.len(), cfg.seed);
    if split.train.is_empty() || split.val.is_empty() || split.test.is_empty() {
        return Err(Error::Argument(format!(
            "{} graphs are too few for a train/val/test split",
            corpus.len()
        )));
    }
    create_dir(out)?;
    let corpus_dir = out.join(CORPUS_DIR);
    create_dir(&corpus_dir)?;
    write_tu_dataset(&corpus, &corpus_dir)?;

    let mut sizes = [0; 2];
    for (k, (role, pool, count, stream)) in [
        (VAL_DIR, &split.val, cfg.eval.val_pairs, VAL_STREAM),
        (TEST_DIR, &split.test, cfg.eval.test_pairs, TEST_STREAM),
    ]
    .into_iter()
    .enumerate()
    {
        let seed = stream_seed(cfg.seed, stream);
        let set = sample_pair_set(&corpus, pool, count, &cfg.sampler, seed)?;
        let side = envelope(
            cfg,
            json!({
                "role": role,
                "source_graphs": pool,
                "pairs": set.len(),
                "positives": set.count(PairLabel::Positive),
                "negatives": set.count(PairLabel::Negative),
            }),
        )?;
        set.write(&out.join(role), &side)?;
        sizes[k] = set.len();
    }
    let summary = SampleSummary {
        graphs: corpus.len(),
        labels: corpus.label_alphabet_size(),
        split,
        val_pairs: sizes[0],
        test_pairs: sizes[1],
    };
    write_json(&out.join(SPLIT_FILE), &envelope(cfg, &summary)?)?;
    write_timings(out, &BTreeMap::from([("sample", start.elapsed().as_secs_f64())]))?;
    Ok(summary)
}

fn read_split(data: &Path) -> Result<Split> {
    let path = data.join(SPLIT_FILE);
    let v: Value = read_json(&path)?;
    let split = v.get("split").cloned().ok_or_else(|| Error::Format {
        path: path.clone(),
        message: "missing split".into(),
    })?;
    serde_json::from_value(split).map_err(|e| Error::Format {
        path,
        message: e.to_string(),
    })
}

// ---------------------------------------------------------------- train

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub epochs: usize,
    pub stopped_early: bool,
    pub best_val_auroc: Option<f64>,
    pub threshold: Threshold,
    pub model_hash: String,
}

/// Sections that must agree between the run that wrote a resume checkpoint
/// and the run continuing it. `max_epochs` may grow.
fn resume_key(cfg: &RunConfig) -> Result<Value> {
    let mut c = cfg.clone();
    c.train.max_epochs = 0;
    Ok(json!({
        "dataset": c.dataset,
        "sampler": c.sampler,
        "encoder": c.encoder,
        "train": c.train,
        "seed": c.seed,
    }))
}

fn save_progress(cfg: &RunConfig, state: &TrainState, labels: &[i64], out: &Path) -> Result<()> {
    let mut last = state.to_checkpoint(labels.to_vec())?;
    last.meta["resume_key"] = resume_key(cfg)?;
    last.save(&out.join(LAST_FILE))?;
    Checkpoint::new(state.best.clone(), labels.to_vec())?.save(&out.join(BEST_FILE))?;
    write_text(&out.join(LOG_FILE), &submatch_core::trainer::log_csv(&state.log))
}

/// Trains on the output of [`sample`] in `data`. Progress is saved after
/// every epoch (`last.ckpt`, `best.ckpt`, `train_log.csv`); with `resume`
/// training continues from those files. The final `model.ckpt` holds the
/// best encoder and its calibrated threshold.
pub fn train(cfg: &RunConfig, data: &Path, out: &Path, resume: bool) -> Result<TrainSummary> {
    let start = Instant::now();
    let corpus = load_tu_dataset_with(&data.join(CORPUS_DIR), CORPUS_NAME, LoadOptions::keep_all())?;
    let split = read_split(data)?;
    let val = PairSet::read(&data.join(VAL_DIR))?;
    if val.label_values != corpus.label_values {
        return Err(Error::Argument("validation pairs and corpus use different label alphabets".into()));
    }
    if split.train.iter().any(|&i| i >= corpus.len()) {
        return Err(Error::Argument("split references graphs missing from the corpus".into()));
    }
    if val.count(PairLabel::Positive) == 0 || val.count(PairLabel::Negative) == 0 {
        return Err(Error::Training("validation set needs positive and negative pairs".into()));
    }
    create_dir(out)?;
    let labels = corpus.label_values.clone();
    let mut state = if resume {
        let last = Checkpoint::load(&out.join(LAST_FILE))?;
        if last.meta.get("resume_key") != Some(&resume_key(cfg)?) {
            return Err(Error::Argument(
                "configuration differs from the run being resumed".into(),
            ));
        }
        if last.label_values != labels {
            return Err(Error::Argument("resume checkpoint uses a different label alphabet".into()));
        }
        let best = Checkpoint::load(&out.join(BEST_FILE))?;
        TrainState::from_checkpoint(last, best.params)?
    } else {
        let params = EncoderParams::init(cfg.encoder, corpus.label_alphabet_size(), cfg.train.seed)?;
        TrainState::new(params, &cfg.train)
    };
    let train_data = TrainData {
        corpus: &corpus.graphs,
        pool: &split.train,
        val: &val,
        sampler: &cfg.sampler,
    };
    while !state.is_finished(&cfg.train) {
        train_epoch(&mut state, &train_data, &cfg.train)?;
        save_progress(cfg, &state, &labels, out)?;
    }
    let threshold = evaluate(&state.best, &val, None, cfg.train.sdr_reduction)?.calibrated;
    let mut model = Checkpoint::new(state.best.clone(), labels)?;
    model.threshold = Some(threshold);
    model.meta = envelope(
        cfg,
        json!({
            "epochs": state.epoch,
            "stopped_early": state.stopped_early,
            "best_val_auroc": state.best_auroc,
        }),
    )?;
    let bytes = model.to_bytes()?;
    let model_path = out.join(MODEL_FILE);
    fs::write(&model_path, &bytes).map_err(io_err(&model_path))?;
    write_text(&out.join(MANIFEST_FILE), &model.manifest())?;
    let summary = TrainSummary {
        epochs: state.epoch,
        stopped_early: state.stopped_early,
        best_val_auroc: state.best_auroc,
        threshold,
        model_hash: content_hash(&bytes),
    };
    write_json(&out.join("train.json"), &envelope(cfg, &summary)?)?;
    write_timings(out, &BTreeMap::from([("train", start.elapsed().as_secs_f64())]))?;
    Ok(summary)
}

// ---------------------------------------------------------------- rank

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRow {
    pub chain: usize,
    pub source: usize,
    pub sizes: Vec<usize>,
    /// Correlation per score mode.
    pub rho: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedChain {
    pub chain: usize,
    pub source: usize,
    pub nodes: usize,
    pub built: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    /// Median and range of the correlation per score mode.
    pub spearman_rho: BTreeMap<String, Option<Summary>>,
    pub chains: Vec<ChainRow>,
    pub skipped: Vec<SkippedChain>,
}

/// Builds `chain_count` nested chains, chain `i` inside graph
/// `i mod graphs.len()`, and correlates each score mode with nesting
/// depth. Graphs too small for the requested length are reported and
/// skipped.
pub fn rank_report(params: &EncoderParams, graphs: &[LabeledGraph], cfg: &RunConfig) -> Result<RankReport> {
    if graphs.is_empty() {
        return Err(Error::Argument("no data graphs to build chains from".into()));
    }
    let seed = stream_seed(cfg.seed, RANK_STREAM);
    let length = cfg.eval.chain_length;
    let built: Vec<std::result::Result<ChainRow, SkippedChain>> = (0..cfg.eval.chain_count)
        .into_par_iter()
        .map(|i| {
            let source = i % graphs.len();
            let d = &graphs[source];
            let chain = build_nested_chain(d, length, &mut child_rng(seed, i as u64))?;
            if chain.len() < length {
                return Ok(Err(SkippedChain {
                    chain: i,
                    source,
                    nodes: d.node_count(),
                    built: chain.len(),
                }));
            }
            let mut rho = BTreeMap::new();
            for mode in ScoreMode::ALL {
                rho.insert(mode.name().to_string(), rank_queries(d, &chain, params, mode)?.rho);
            }
            Ok(Ok(ChainRow {
                chain: i,
                source,
                sizes: chain.iter().map(LabeledGraph::node_count).collect(),
                rho,
            }))
        })
        .collect::<Result<_>>()?;
    let mut chains = Vec::new();
    let mut skipped = Vec::new();
    for b in built {
        match b {
            Ok(c) => chains.push(c),
            Err(s) => {
                log::warn!(
                    "graph {} has {} nodes; chain {} stopped at length {}",
                    s.source,
                    s.nodes,
                    s.chain,
                    s.built
                );
                skipped.push(s)
            }
        }
    }
    let spearman_rho = ScoreMode::ALL
        .iter()
        .map(|m| {
            let vals: Vec<f64> = chains.iter().map(|c| c.rho[m.name()]).collect();
            (m.name().to_string(), summarize(&vals))
        })
        .collect();
    Ok(RankReport {
        spearman_rho,
        chains,
        skipped,
    })
}

/// Ranking experiment over every graph of `graphs`; writes `rank.json`
/// and `rank.csv` (`chain,source,mode,rho`) into `out`.
pub fn rank(cfg: &RunConfig, checkpoint: &Path, graphs: &GraphRef, out: &Path) -> Result<RankReport> {
    let start = Instant::now();
    let model = load_model(checkpoint)?;
    let (g, values) = graphs.load()?;
    let g = conform_labels(g, &values, &model.checkpoint.label_values)?;
    let report = rank_report(&model.checkpoint.params, &g, cfg)?;
    create_dir(out)?;
    let mut csv = String::from("chain,source,mode,rho\n");
    for c in &report.chains {
        for (mode, rho) in &c.rho {
            csv.push_str(&format!("{},{},{},{}\n", c.chain, c.source, mode, rho));
        }
    }
    write_text(&out.join("rank.csv"), &csv)?;
    write_json(
        &out.join("rank.json"),
        &envelope(cfg, json!({ "checkpoint_hash": model.hash, "graphs": graphs.to_string(), "report": report }))?,
    )?;
    write_timings(out, &BTreeMap::from([("rank", start.elapsed().as_secs_f64())]))?;
    Ok(report)
}

// ---------------------------------------------------------------- align

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignReport {
    pub hit_at_k: BTreeMap<String, f64>,
    pub pairs_used: usize,
    /// Positive pairs whose ground-truth mapping the oracle could not
    /// produce within its budget.
    pub pairs_skipped: usize,
}

/// Hit@K of node-level scores against an oracle mapping, averaged over
/// the positive pairs of `pairs`.
pub fn align_report(params: &EncoderParams, pairs: &PairSet, cfg: &RunConfig) -> Result<AlignReport> {
    let ks = &cfg.eval.hit_k;
    let positives: Vec<usize> = (0..pairs.len())
        .filter(|&i| pairs.pairs[i].label == PairLabel::Positive)
        .collect();
    let per_pair: Vec<Option<Vec<f64>>> = positives
        .par_iter()
        .map(|&i| {
            let (q, d, _) = pairs.pair(i);
            let outcome = find_subgraph_isomorphism(q, d, cfg.sampler.oracle_timeout())?;
            let Verdict::Match(mapping) = outcome.verdict else {
                return Ok(None);
            };
            let scores = node_pair_scores(&encode_nodes(q, params)?, &encode_nodes(d, params)?)?;
            ks.iter()
                .map(|&k| hit_at_k(&mapping, &scores, k))
                .collect::<Result<Vec<f64>>>()
                .map(Some)
        })
        .collect::<Result<_>>()?;
    let used: Vec<&Vec<f64>> = per_pair.iter().flatten().collect();
    let skipped = per_pair.len() - used.len();
    if skipped > 0 {
        log::warn!("{skipped} positive pairs had no oracle mapping and were left out of hit@k");
    }
    let hit_at_k = ks
        .iter()
        .enumerate()
        .map(|(j, k)| {
            let mean = if used.is_empty() {
                0.0
            } else {
                used.iter().map(|h| h[j]).sum::<f64>() / used.len() as f64
            };
            (k.to_string(), mean)
        })
        .collect();
    Ok(AlignReport {
        hit_at_k,
        pairs_used: used.len(),
        pairs_skipped: skipped,
    })
}

/// Node alignment over a pair set; writes `align.json` into `out`.
pub fn align(cfg: &RunConfig, checkpoint: &Path, pairs: &Path, out: &Path) -> Result<AlignReport> {
    let start = Instant::now();
    let model = load_model(checkpoint)?;
    let set = load_pairs_for(&model, pairs)?;
    let report = align_report(&model.checkpoint.params, &set, cfg)?;
    create_dir(out)?;
    write_json(
        &out.join("align.json"),
        &envelope(cfg, json!({ "checkpoint_hash": model.hash, "report": report }))?,
    )?;
    write_timings(out, &BTreeMap::from([("align", start.elapsed().as_secs_f64())]))?;
    Ok(report)
}

// ---------------------------------------------------------------- eval

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreHistograms {
    pub positive: Histogram,
    pub negative: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub checkpoint_hash: String,
    pub auroc: f64,
    /// Accuracy at the checkpoint's threshold; absent when it has none.
    pub accuracy: Option<f64>,
    pub threshold: Option<f64>,
    pub positives: usize,
    pub negatives: usize,
    pub unknown: usize,
    pub spearman_rho: BTreeMap<String, Option<Summary>>,
    pub chains_skipped: usize,
    pub hit_at_k: BTreeMap<String, f64>,
    pub histograms: ScoreHistograms,
}

/// Scores a pair set with a trained model. Writes `metrics.json` and
/// `scores.csv` (`q_idx,d_idx,label,psi,compliance,sdr,hinge`) into `out`.
/// Ranking chains are built inside the pair set's data graphs and node
/// alignment uses its positive pairs.
pub fn eval(cfg: &RunConfig, checkpoint: &Path, pairs: &Path, out: &Path) -> Result<MetricsReport> {
    let start = Instant::now();
    let model = load_model(checkpoint)?;
    let set = load_pairs_for(&model, pairs)?;
    let params = &model.checkpoint.params;
    let threshold = model.checkpoint.threshold;
    if threshold.is_none() {
        log::warn!("checkpoint has no calibrated threshold; accuracy is not reported");
    }
    let scored = evaluate(params, &set, threshold, cfg.train.sdr_reduction)?;
    let t_scores = start.elapsed().as_secs_f64();
    let ranking = rank_report(params, &set.data, cfg)?;
    let t_rank = start.elapsed().as_secs_f64() - t_scores;
    let alignment = align_report(params, &set, cfg)?;
    let t_align = start.elapsed().as_secs_f64() - t_scores - t_rank;

    let bins = cfg.eval.histogram_bins;
    let by_label = |l: &str| -> Vec<f64> {
        scored
            .scores
            .iter()
            .filter(|s| s.label == l)
            .map(|s| s.psi)
            .collect()
    };
    let report = MetricsReport {
        checkpoint_hash: model.hash.clone(),
        auroc: scored.auroc,
        accuracy: scored.accuracy,
        threshold: threshold.map(|t| t.tau),
        positives: scored.positives,
        negatives: scored.negatives,
        unknown: scored.unknown,
        spearman_rho: ranking.spearman_rho,
        chains_skipped: ranking.skipped.len(),
        hit_at_k: alignment.hit_at_k,
        histograms: ScoreHistograms {
            positive: histogram(&by_label(&PairLabel::Positive.to_string()), -1.0, 1.0, bins),
            negative: histogram(&by_label(&PairLabel::Negative.to_string()), -1.0, 1.0, bins),
        },
    };
    create_dir(out)?;
    let mut csv = String::from("q_idx,d_idx,label,psi,compliance,sdr,hinge\n");
    for s in &scored.scores {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.query, s.data, s.label, s.psi, s.compliance, s.sdr, s.hinge
        ));
    }
    write_text(&out.join("scores.csv"), &csv)?;
    write_json(&out.join("metrics.json"), &envelope(cfg, &report)?)?;
    write_timings(
        out,
        &BTreeMap::from([("scoring", t_scores), ("ranking", t_rank), ("alignment", t_align)]),
    )?;
    Ok(report)
}

// ---------------------------------------------------------------- index / query

pub const INDEX_FILE: &str = "index.bin";
pub const INDEX_META: &str = "index.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSummary {
    pub checkpoint_hash: String,
    pub graph: String,
    pub k: usize,
    pub nodes: usize,
    pub index_hash: String,
}

/// Embeds the k-hop neighborhood of every node of one large graph. Writes
/// `index.bin` and `index.json` into `out`. `k` defaults to the configured
/// radius, then to the encoder depth.
pub fn index(cfg: &RunConfig, checkpoint: &Path, graph: &GraphRef, k: Option<usize>, out: &Path) -> Result<IndexSummary> {
    let start = Instant::now();
    let model = load_model(checkpoint)?;
    let (g, values) = graph.load()?;
    if g.len() != 1 {
        return Err(Error::Argument(format!(
            "index needs a single graph; use {graph}@<idx>"
        )));
    }
    let g = conform_labels(g, &values, &model.checkpoint.label_values)?.remove(0);
    let params = &model.checkpoint.params;
    let k = k.or(cfg.eval.index_k).unwrap_or(params.config.num_layers);
    let idx = NeighborhoodIndex::build(&g, params, k)?;
    let bytes = idx.to_bytes();
    create_dir(out)?;
    let path = out.join(INDEX_FILE);
    fs::write(&path, &bytes).map_err(io_err(&path))?;
    let summary = IndexSummary {
        checkpoint_hash: model.hash,
        graph: graph.to_string(),
        k,
        nodes: idx.len(),
        index_hash: content_hash(&bytes),
    };
    write_json(&out.join(INDEX_META), &envelope(cfg, &summary)?)?;
    write_timings(out, &BTreeMap::from([("index", start.elapsed().as_secs_f64())]))?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryDecision {
    pub query: usize,
    pub best_node: Option<usize>,
    pub max_psi: Option<f64>,
    pub decision: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySummary {
    pub checkpoint_hash: String,
    pub index_hash: String,
    pub tau: f64,
    pub queries: usize,
    pub matched: usize,
    pub decisions: Vec<QueryDecision>,
}

/// Decides containment of each query in the indexed graph: the best
/// neighborhood score against `tau` (the checkpoint's threshold unless
/// overridden). Writes `decisions.csv` and `query.json` into `out`.
pub fn query(
    cfg: &RunConfig,
    checkpoint: &Path,
    index_dir: &Path,
    queries: &GraphRef,
    tau: Option<f64>,
    out: &Path,
) -> Result<QuerySummary> {
    let start = Instant::now();
    let model = load_model(checkpoint)?;
    let meta_path = index_dir.join(INDEX_META);
    let meta: Value = read_json(&meta_path)?;
    if meta.get("checkpoint_hash").and_then(Value::as_str) != Some(model.hash.as_str()) {
        return Err(Error::Argument(format!(
            "{} was built with a different checkpoint",
            index_dir.display()
        )));
    }
    let bin_path = index_dir.join(INDEX_FILE);
    let bytes = fs::read(&bin_path).map_err(io_err(&bin_path))?;
    let idx = NeighborhoodIndex::from_bytes(&bytes, &bin_path)?;
    let tau = tau
        .or(model.checkpoint.threshold.map(|t| t.tau))
        .ok_or_else(|| Error::Argument("checkpoint has no threshold; pass --tau".into()))?;
    let (q, values) = queries.load()?;
    let q = conform_labels(q, &values, &model.checkpoint.label_values)?;
    let embs = embed_graphs(&model.checkpoint.params, &q)?;
    let decisions = embs
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let hit = idx.best(e)?;
            Ok(QueryDecision {
                query: i,
                best_node: hit.map(|h| h.node),
                max_psi: hit.map(|h| h.psi),
                decision: hit.is_some_and(|h| h.psi > tau),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = QuerySummary {
        checkpoint_hash: model.hash,
        index_hash: content_hash(&bytes),
        tau,
        queries: decisions.len(),
        matched: decisions.iter().filter(|d| d.decision).count(),
        decisions,
    };
    create_dir(out)?;
    let mut csv = String::from("query,best_node,max_psi,decision\n");
    for d in &summary.decisions {
        let node = d.best_node.map(|n| n.to_string()).unwrap_or_default();
        let psi = d.max_psi.map(|p| p.to_string()).unwrap_or_default();
        csv.push_str(&format!("{},{},{},{}\n", d.query, node, psi, u8::from(d.decision)));
    }
    write_text(&out.join("decisions.csv"), &csv)?;
    write_json(&out.join("query.json"), &envelope(cfg, &summary)?)?;
    write_timings(out, &BTreeMap::from([("query", start.elapsed().as_secs_f64())]))?;
    Ok(summary)
}

// ---------------------------------------------------------------- oracle

/// Exact containment check of one query graph in one data graph.
pub fn oracle(q: &GraphRef, d: &GraphRef, timeout_ms: u64) -> Result<OracleOutcome> {
    let one = |r: &GraphRef| -> Result<(LabeledGraph, Vec<i64>)> {
        let (mut g, values) = r.load()?;
        if g.len() != 1 {
            return Err(Error::Argument(format!("{r} must name a single graph (NAME@idx)")));
        }
        Ok((g.remove(0), values))
    };
    let (qg, qv) = one(q)?;
    let (dg, dv) = one(d)?;
    // compare by original label values; query labels unknown to the data
    // graph cannot match anything
    let qg = match conform_labels(vec![qg], &qv, &dv) {
        Ok(mut v) => v.remove(0),
        Err(_) => {
            return Ok(OracleOutcome {
                verdict: Verdict::NoMatch,
                elapsed: std::time::Duration::ZERO,
                nodes_explored: 0,
            })
        }
    };
    find_subgraph_isomorphism(&qg, &dg, std::time::Duration::from_millis(timeout_ms))
}

/// Default output directory of a subcommand under the configured paths.
pub fn default_out(cfg: &RunConfig, command: &str) -> PathBuf {
    match command {
        "sample" => cfg.paths.data_dir.clone(),
        "train" => cfg.paths.model_dir.clone(),
        other => cfg.paths.model_dir.join(other),
    }
}
