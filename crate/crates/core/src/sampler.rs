//! Random-walk sampling of data graphs, matched and unmatched queries,
//! training triplets, nested query chains and dataset splits.

use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LabeledGraph;
use crate::oracle::{find_subgraph_isomorphism, label_multiset_contained, Verdict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Inclusive node-count range of sampled data graphs.
    pub data_walk_range: [usize; 2],
    /// Query size as a fraction of the data graph's node count.
    pub query_fraction_range: [f64; 2],
    pub negative_retry_cap: usize,
    pub oracle_timeout_ms: u64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            data_walk_range: [10, 30],
            query_fraction_range: [0.25, 0.5],
            negative_retry_cap: 20,
            oracle_timeout_ms: 1000,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.data_walk_range;
        if lo < 1 || lo > hi {
            return Err(Error::arg(format!("bad data_walk_range [{lo}, {hi}]")));
        }
        let [a, b] = self.query_fraction_range;
        if !(a > 0.0 && a <= b && b <= 1.0) {
            return Err(Error::arg(format!("bad query_fraction_range [{a}, {b}]")));
        }
        if self.oracle_timeout_ms == 0 {
            return Err(Error::arg("oracle_timeout_ms must be positive"));
        }
        Ok(())
    }

    pub fn oracle_timeout(&self) -> Duration {
        Duration::from_millis(self.oracle_timeout_ms)
    }
}

/// How a pair's label was established.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    PositiveByConstruction,
    NegativeVerified,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairExample {
    pub query: LabeledGraph,
    pub data: LabeledGraph,
    pub label: bool,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Triplet {
    pub data: LabeledGraph,
    pub positive: LabeledGraph,
    pub negative: LabeledGraph,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletBatch {
    pub triplets: Vec<Triplet>,
    /// Slots dropped because no negative was found within the retry cap.
    pub failures: usize,
}

/// Node ids visited by a walk that grows through uniformly chosen frontier
/// edges, in visiting order.
pub fn random_walk_nodes<R: Rng + ?Sized>(g: &LabeledGraph, n: usize, rng: &mut R) -> Vec<usize> {
    let total = g.node_count();
    if total == 0 || n == 0 {
        return Vec::new();
    }
    let mut visited = vec![false; total];
    let start = rng.random_range(0..total);
    visited[start] = true;
    let mut order = vec![start];
    // frontier edges (visited, unvisited), kept in insertion order
    let mut frontier: Vec<(usize, usize)> = g.neighbors(start).iter().map(|&u| (start, u as usize)).collect();
    while order.len() < n && !frontier.is_empty() {
        let pick = frontier[rng.random_range(0..frontier.len())].1;
        visited[pick] = true;
        order.push(pick);
        frontier.retain(|&(_, u)| u != pick);
        frontier.extend(
            g.neighbors(pick)
                .iter()
                .map(|&u| u as usize)
                .filter(|&u| !visited[u])
                .map(|u| (pick, u)),
        );
    }
    order
}

/// Induced subgraph on the nodes of a random walk of up to `n` nodes.
pub fn random_walk_sample<R: Rng + ?Sized>(g: &LabeledGraph, n: usize, rng: &mut R) -> Result<LabeledGraph> {
    if n == 0 {
        return Err(Error::arg("walk size must be at least 1"));
    }
    let mut nodes = random_walk_nodes(g, n, rng);
    nodes.sort_unstable();
    g.induced_subgraph(&nodes)
}

fn query_size<R: Rng + ?Sized>(data_nodes: usize, cfg: &SamplerConfig, rng: &mut R) -> usize {
    let [a, b] = cfg.query_fraction_range;
    let frac = if a < b { rng.random_range(a..=b) } else { a };
    ((frac * data_nodes as f64).round() as usize).clamp(1, data_nodes.max(1))
}

/// A data graph: a walk of `data_walk_range` nodes inside a corpus graph.
pub fn sample_data_graph<R: Rng + ?Sized>(g: &LabeledGraph, cfg: &SamplerConfig, rng: &mut R) -> Result<LabeledGraph> {
    let [lo, hi] = cfg.data_walk_range;
    let n = rng.random_range(lo..=hi);
    random_walk_sample(g, n, rng)
}

/// A query matched by `d` by construction: a walk inside `d`.
pub fn sample_positive<R: Rng + ?Sized>(d: &LabeledGraph, cfg: &SamplerConfig, rng: &mut R) -> Result<LabeledGraph> {
    let n = query_size(d.node_count(), cfg, rng);
    let mut nodes = random_walk_nodes(d, n, rng);
    nodes.sort_unstable();
    let q = d.induced_subgraph(&nodes)?;
    debug_assert!(crate::oracle::verify_mapping(&q, d, &crate::oracle::NodeMapping::new(nodes)).unwrap_or(false));
    Ok(q)
}

/// A query drawn from a corpus graph other than `exclude` that the oracle
/// proves is not contained in `d`. Timeouts count as rejections. `None`
/// once `negative_retry_cap` candidates were rejected.
pub fn sample_negative<R: Rng + ?Sized>(
    d: &LabeledGraph,
    corpus: &[LabeledGraph],
    exclude: Option<usize>,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<Option<LabeledGraph>> {
    let sources: Vec<usize> = (0..corpus.len()).filter(|&i| Some(i) != exclude).collect();
    sample_negative_from(d, corpus, &sources, cfg, rng)
}

/// As [`sample_negative`], drawing source graphs from `corpus[sources]`.
pub fn sample_negative_from<R: Rng + ?Sized>(
    d: &LabeledGraph,
    corpus: &[LabeledGraph],
    sources: &[usize],
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<Option<LabeledGraph>> {
    if sources.is_empty() {
        return Ok(None);
    }
    for _ in 0..cfg.negative_retry_cap.max(1) {
        let src = &corpus[sources[rng.random_range(0..sources.len())]];
        let n = query_size(d.node_count(), cfg, rng);
        let candidate = random_walk_sample(src, n, rng)?;
        if !label_multiset_contained(&candidate, d) {
            return Ok(Some(candidate));
        }
        let outcome = find_subgraph_isomorphism(&candidate, d, cfg.oracle_timeout())?;
        if outcome.verdict == Verdict::NoMatch {
            return Ok(Some(candidate));
        }
    }
    Ok(None)
}

/// RNG for item `index` of a run seeded with `seed`: one ChaCha stream per
/// index, so items can be generated in any order or in parallel.
pub fn child_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One training triplet: the data graph comes from a uniformly chosen graph
/// of `pool`, the negative from a different graph of `pool`.
pub fn sample_triplet<R: Rng + ?Sized>(
    corpus: &[LabeledGraph],
    pool: &[usize],
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<Option<Triplet>> {
    if pool.is_empty() {
        return Err(Error::arg("empty graph pool"));
    }
    let src = pool[rng.random_range(0..pool.len())];
    let data = sample_data_graph(&corpus[src], cfg, rng)?;
    let positive = sample_positive(&data, cfg, rng)?;
    let sources: Vec<usize> = pool.iter().copied().filter(|&i| i != src).collect();
    let negative = sample_negative_from(&data, corpus, &sources, cfg, rng)?;
    Ok(negative.map(|negative| Triplet {
        data,
        positive,
        negative,
    }))
}

/// Triplets `first .. first + size` of the stream seeded with `seed`,
/// generated in parallel and returned in index order. Negatives are drawn
/// from graphs of `pool` only.
pub fn sample_triplet_batch(
    corpus: &[LabeledGraph],
    pool: &[usize],
    size: usize,
    first: u64,
    cfg: &SamplerConfig,
    seed: u64,
) -> Result<TripletBatch> {
    let results: Vec<Option<Triplet>> = (0..size as u64)
        .into_par_iter()
        .map(|i| sample_triplet(corpus, pool, cfg, &mut child_rng(seed, first + i)))
        .collect::<Result<_>>()?;
    let failures = results.iter().filter(|t| t.is_none()).count();
    if failures > 0 {
        log::warn!("{failures} of {size} triplet slots found no negative");
    }
    Ok(TripletBatch {
        triplets: results.into_iter().flatten().collect(),
        failures,
    })
}

/// Graph indices of a train/validation/test split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles `0..n` and holds out 20% for test, then 20% of the rest for
/// validation. Both shares are rounded half up.
pub fn build_split(n: usize, seed: u64) -> Split {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = (n * 2 + 5) / 10;
    let rest = n - n_test;
    let n_val = (rest * 2 + 5) / 10;
    let test = idx[..n_test].to_vec();
    let val = idx[n_test..n_test + n_val].to_vec();
    let train = idx[n_test + n_val..].to_vec();
    Split { train, val, test }
}

/// Queries `Q1 ⊋ Q2 ⊋ ...`, each a walk inside its predecessor with strictly
/// fewer nodes, `Q1` a walk inside `d`. Shorter than `length` when `d` is too
/// small.
pub fn build_nested_chain<R: Rng + ?Sized>(d: &LabeledGraph, length: usize, rng: &mut R) -> Result<Vec<LabeledGraph>> {
    let mut chain: Vec<LabeledGraph> = Vec::with_capacity(length);
    if length == 0 || d.node_count() == 0 {
        return Ok(chain);
    }
    for i in 0..length {
        let (prev, prev_n) = match chain.last() {
            None => (d, d.node_count() + 1),
            Some(q) => (q, q.node_count()),
        };
        if prev_n <= 1 {
            break;
        }
        let hi = prev_n - 1;
        let lo = (length - i).min(hi);
        let n = rng.random_range(lo..=hi);
        let mut nodes = random_walk_nodes(prev, n, rng);
        nodes.sort_unstable();
        let q = prev.induced_subgraph(&nodes)?;
        chain.push(q);
    }
    Ok(chain)
}
