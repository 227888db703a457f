//! Exact subgraph-isomorphism search used as ground truth.
//!
//! A VF2-style backtracking matcher: query nodes are placed in a fixed,
//! connected order (rarest data label first), candidates for each query node
//! come from the data-neighborhood of an already placed query neighbor, and a
//! candidate is feasible when its label matches, its degree is large enough
//! and every placed query neighbor maps onto a data neighbor.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LabeledGraph;

/// Default per-pair search budget at desk scale.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(1);

/// Injective map from query node ids to data node ids; `targets[v]` is the
/// image of query node `v`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeMapping {
    targets: Vec<usize>,
}

impl NodeMapping {
    pub fn new(targets: Vec<usize>) -> Self {
        NodeMapping { targets }
    }

    pub fn identity(n: usize) -> Self {
        NodeMapping {
            targets: (0..n).collect(),
        }
    }

    pub fn get(&self, query_node: usize) -> usize {
        self.targets[query_node]
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

impl fmt::Display for NodeMapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.targets.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{i}->{t}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Match(NodeMapping),
    NoMatch,
    Timeout,
}

#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub verdict: Verdict,
    pub elapsed: Duration,
    /// Partial assignments extended during the search.
    pub nodes_explored: u64,
}

impl OracleOutcome {
    pub fn is_match(&self) -> bool {
        matches!(self.verdict, Verdict::Match(_))
    }
}

/// Ground-truth label of a (query, data) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairLabel {
    Positive,
    Negative,
    Unknown,
}

impl PairLabel {
    pub fn as_bool(self) -> Option<bool> {
        match self {
            PairLabel::Positive => Some(true),
            PairLabel::Negative => Some(false),
            PairLabel::Unknown => None,
        }
    }
}

impl fmt::Display for PairLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PairLabel::Positive => "1",
            PairLabel::Negative => "0",
            PairLabel::Unknown => "unknown",
        })
    }
}

impl FromStr for PairLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" => Ok(PairLabel::Positive),
            "0" => Ok(PairLabel::Negative),
            "unknown" => Ok(PairLabel::Unknown),
            other => Err(Error::arg(format!("pair label {other:?} is not 1, 0 or unknown"))),
        }
    }
}

impl From<&Verdict> for PairLabel {
    fn from(v: &Verdict) -> Self {
        match v {
            Verdict::Match(_) => PairLabel::Positive,
            Verdict::NoMatch => PairLabel::Negative,
            Verdict::Timeout => PairLabel::Unknown,
        }
    }
}

/// True when the label multiset of `q` fits inside that of `d`.
pub fn label_multiset_contained(q: &LabeledGraph, d: &LabeledGraph) -> bool {
    let size = q
        .max_label()
        .into_iter()
        .chain(d.max_label())
        .max()
        .map_or(0, |l| l as usize + 1);
    let cq = q.label_counts(size);
    let cd = d.label_counts(size);
    cq.iter().zip(&cd).all(|(a, b)| a <= b)
}

/// Checks that `m` is an injective, label-preserving map under which every
/// query edge lands on a data edge.
///
/// Stated as the selection-matrix containment property: with `P` the
/// `|V_Q| x |V_D|` selection matrix of `m`, every entry of
/// `P A_D P^T - A_Q` lies in `{0, 1}` and the entries sum to a non-negative value.
pub fn verify_mapping(q: &LabeledGraph, d: &LabeledGraph, m: &NodeMapping) -> Result<bool> {
    if m.len() != q.node_count() {
        return Err(Error::arg(format!(
            "mapping covers {} nodes, query has {}",
            m.len(),
            q.node_count()
        )));
    }
    if let Some(&bad) = m.targets().iter().find(|&&t| t >= d.node_count()) {
        return Err(Error::arg(format!(
            "mapping targets node {bad} outside 0..{}",
            d.node_count()
        )));
    }
    let mut used = vec![false; d.node_count()];
    for &t in m.targets() {
        if used[t] {
            return Ok(false);
        }
        used[t] = true;
    }
    if (0..q.node_count()).any(|v| q.label(v) != d.label(m.get(v))) {
        return Ok(false);
    }
    let mut total: i64 = 0;
    for i in 0..q.node_count() {
        for j in 0..q.node_count() {
            let permuted = i64::from(d.has_edge(m.get(i), m.get(j)));
            let query = i64::from(q.has_edge(i, j));
            let entry = permuted - query;
            if entry != 0 && entry != 1 {
                return Ok(false);
            }
            total += entry;
        }
    }
    Ok(total >= 0)
}

struct SearchPlan {
    order: Vec<usize>,
    /// For each position, a previously placed neighbor whose image seeds the candidates.
    parent: Vec<Option<usize>>,
    /// For each position, the query neighbors placed earlier.
    back: Vec<Vec<usize>>,
}

fn plan(q: &LabeledGraph, d: &LabeledGraph) -> SearchPlan {
    let n = q.node_count();
    let alphabet = q
        .max_label()
        .into_iter()
        .chain(d.max_label())
        .max()
        .map_or(0, |l| l as usize + 1);
    let freq = d.label_counts(alphabet);
    let rarity = |v: usize| freq[q.label(v) as usize];

    let mut placed = vec![false; n];
    let mut links = vec![0usize; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        // Prefer nodes touching the placed set, then rarest label, then lowest id.
        let next = (0..n)
            .filter(|&v| !placed[v])
            .min_by_key(|&v| (std::cmp::Reverse(links[v]), rarity(v), v))
            .expect("unplaced node remains");
        placed[next] = true;
        order.push(next);
        for &w in q.neighbors(next) {
            links[w as usize] += 1;
        }
    }

    let mut position = vec![usize::MAX; n];
    for (i, &v) in order.iter().enumerate() {
        position[v] = i;
    }
    let mut parent = Vec::with_capacity(n);
    let mut back = Vec::with_capacity(n);
    for (i, &v) in order.iter().enumerate() {
        let mut earlier: Vec<usize> = q
            .neighbors(v)
            .iter()
            .map(|&w| w as usize)
            .filter(|&w| position[w] < i)
            .collect();
        earlier.sort_by_key(|&w| position[w]);
        parent.push(earlier.first().copied());
        back.push(earlier);
    }
    SearchPlan {
        order,
        parent,
        back,
    }
}

struct Search<'a> {
    q: &'a LabeledGraph,
    d: &'a LabeledGraph,
    plan: SearchPlan,
    map: Vec<usize>,
    used: Vec<bool>,
    explored: u64,
    deadline: Instant,
    timed_out: bool,
}

const CLOCK_INTERVAL: u64 = 64;

impl Search<'_> {
    fn feasible(&self, v: usize, c: usize, pos: usize) -> bool {
        !self.used[c]
            && self.d.label(c) == self.q.label(v)
            && self.d.degree(c) >= self.q.degree(v)
            && self.plan.back[pos]
                .iter()
                .all(|&w| self.d.has_edge(self.map[w], c))
    }

    fn extend(&mut self, pos: usize) -> bool {
        if pos == self.plan.order.len() {
            return true;
        }
        let v = self.plan.order[pos];
        let candidates: Vec<usize> = match self.plan.parent[pos] {
            Some(p) => self
                .d
                .neighbors(self.map[p])
                .iter()
                .map(|&c| c as usize)
                .collect(),
            None => (0..self.d.node_count()).collect(),
        };
        for c in candidates {
            if !self.feasible(v, c, pos) {
                continue;
            }
            self.explored += 1;
            if self.explored % CLOCK_INTERVAL == 0 && Instant::now() >= self.deadline {
                self.timed_out = true;
                return false;
            }
            self.map[v] = c;
            self.used[c] = true;
            if self.extend(pos + 1) {
                return true;
            }
            self.used[c] = false;
            self.map[v] = usize::MAX;
            if self.timed_out {
                return false;
            }
        }
        false
    }
}

/// Searches for a label- and edge-preserving injection of `q` into `d`.
///
/// Returns `NoMatch` only after exhausting the search space and `Timeout`
/// when the budget ran out first. Candidates are tried in ascending data-node
/// order, so the returned mapping is deterministic.
pub fn find_subgraph_isomorphism(
    q: &LabeledGraph,
    d: &LabeledGraph,
    timeout: Duration,
) -> Result<OracleOutcome> {
    if timeout.is_zero() {
        return Err(Error::arg("oracle timeout must be positive"));
    }
    let start = Instant::now();
    let done = |verdict, explored| OracleOutcome {
        verdict,
        elapsed: start.elapsed(),
        nodes_explored: explored,
    };
    if q.node_count() > d.node_count()
        || q.edge_count() > d.edge_count()
        || !label_multiset_contained(q, d)
    {
        return Ok(done(Verdict::NoMatch, 0));
    }
    let plan = plan(q, d);
    let mut search = Search {
        q,
        d,
        plan,
        map: vec![usize::MAX; q.node_count()],
        used: vec![false; d.node_count()],
        explored: 0,
        deadline: start + timeout,
        timed_out: false,
    };
    let found = search.extend(0);
    let verdict = if found {
        let m = NodeMapping::new(search.map.clone());
        debug_assert!(verify_mapping(q, d, &m).unwrap_or(false));
        Verdict::Match(m)
    } else if search.timed_out {
        Verdict::Timeout
    } else {
        Verdict::NoMatch
    };
    Ok(done(verdict, search.explored))
}

/// Labels each `(query, data)` pair with the oracle; timeouts become `Unknown`.
/// Pairs are searched in parallel and results keep the input order.
pub fn label_pairs(
    pairs: &[(&LabeledGraph, &LabeledGraph)],
    timeout: Duration,
) -> Result<Vec<PairLabel>> {
    pairs
        .par_iter()
        .map(|(q, d)| find_subgraph_isomorphism(q, d, timeout).map(|o| PairLabel::from(&o.verdict)))
        .collect()
}

/// Reference decision by enumerating every injection of `q` into `d`, with
/// no pruning beyond the size check. Exponential; meant for cross-checking
/// the matcher on graphs of about eight nodes.
pub fn exhaustive_contains(q: &LabeledGraph, d: &LabeledGraph) -> bool {
    fn go(q: &LabeledGraph, d: &LabeledGraph, v: usize, map: &mut Vec<usize>, used: &mut [bool]) -> bool {
        if v == q.node_count() {
            return verify_mapping(q, d, &NodeMapping::new(map.clone())).unwrap_or(false);
        }
        for c in 0..d.node_count() {
            if used[c] {
                continue;
            }
            used[c] = true;
            map.push(c);
            let hit = go(q, d, v + 1, map, used);
            map.pop();
            used[c] = false;
            if hit {
                return true;
            }
        }
        false
    }
    if q.node_count() > d.node_count() {
        return false;
    }
    go(q, d, 0, &mut Vec::with_capacity(q.node_count()), &mut vec![false; d.node_count()])
}
