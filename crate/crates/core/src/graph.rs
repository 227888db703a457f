//! Undirected node-labeled graphs in compressed adjacency form.
//!
//! Every graph keeps its neighbor lists sorted ascending, so any iteration
//! over a node's neighborhood happens in one canonical order. All downstream
//! numeric work (aggregation sums, search order in the oracle) relies on that.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Dense 0-based label id drawn from the owning dataset's alphabet.
pub type Label = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledGraph {
    labels: Vec<Label>,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
}

impl LabeledGraph {
    /// Builds a graph from per-node labels and an undirected edge list.
    ///
    /// Duplicate edges (in either orientation) collapse into one. Self-loops
    /// and out-of-range endpoints are rejected.
    pub fn from_edges(labels: Vec<Label>, edges: &[(usize, usize)]) -> Result<Self> {
        let n = labels.len();
        let mut pairs = Vec::with_capacity(edges.len() * 2);
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::arg(format!(
                    "edge ({u}, {v}) references a node outside 0..{n}"
                )));
            }
            if u == v {
                return Err(Error::arg(format!("self-loop on node {u}")));
            }
            pairs.push((u as u32, v as u32));
            pairs.push((v as u32, u as u32));
        }
        pairs.sort_unstable();
        pairs.dedup();
        Ok(Self::from_sorted_arcs(labels, &pairs))
    }

    /// `arcs` must be sorted, deduplicated and symmetric.
    fn from_sorted_arcs(labels: Vec<Label>, arcs: &[(u32, u32)]) -> Self {
        let n = labels.len();
        let mut offsets = vec![0usize; n + 1];
        for &(u, _) in arcs {
            offsets[u as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let neighbors = arcs.iter().map(|&(_, v)| v).collect();
        LabeledGraph {
            labels,
            offsets,
            neighbors,
        }
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> Label {
        self.labels[v]
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&(v as u32)).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.node_count()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .map(|&v| v as usize)
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    /// Compressed adjacency as `(offsets, neighbors)`.
    pub fn csr(&self) -> (&[usize], &[u32]) {
        (&self.offsets, &self.neighbors)
    }

    /// Occurrence count of each label id below `alphabet_size`.
    pub fn label_counts(&self, alphabet_size: usize) -> Vec<usize> {
        let mut counts = vec![0; alphabet_size];
        for &l in &self.labels {
            if (l as usize) < alphabet_size {
                counts[l as usize] += 1;
            }
        }
        counts
    }

    pub fn max_label(&self) -> Option<Label> {
        self.labels.iter().copied().max()
    }

    /// Hop distance from `root` to every node (`None` when unreachable).
    pub fn bfs_distances(&self, root: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.node_count()];
        let mut queue = VecDeque::new();
        dist[root] = Some(0);
        queue.push_back(root);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for &w in self.neighbors(u) {
                let w = w as usize;
                if dist[w].is_none() {
                    dist[w] = Some(du + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Node sets of the connected components, each sorted ascending, ordered
    /// by their smallest node id.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut components = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut head = 0;
            while head < comp.len() {
                let u = comp[head];
                head += 1;
                for &w in self.neighbors(u) {
                    let w = w as usize;
                    if !seen[w] {
                        seen[w] = true;
                        comp.push(w);
                    }
                }
            }
            comp.sort_unstable();
            components.push(comp);
        }
        components
    }

    pub fn is_connected(&self) -> bool {
        self.node_count() > 0 && self.connected_components().len() == 1
    }

    /// Subgraph induced by `nodes`, relabeled `0..k` in ascending original-id order.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<LabeledGraph> {
        if nodes.is_empty() {
            return Err(Error::arg("induced subgraph needs at least one node"));
        }
        let n = self.node_count();
        let mut sorted = nodes.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if let Some(&bad) = sorted.iter().find(|&&v| v >= n) {
            return Err(Error::arg(format!("node {bad} is outside 0..{n}")));
        }
        let mut new_id = vec![u32::MAX; n];
        for (i, &v) in sorted.iter().enumerate() {
            new_id[v] = i as u32;
        }
        let labels = sorted.iter().map(|&v| self.labels[v]).collect();
        let mut arcs = Vec::new();
        for (i, &v) in sorted.iter().enumerate() {
            for &w in self.neighbors(v) {
                let j = new_id[w as usize];
                if j != u32::MAX {
                    arcs.push((i as u32, j));
                }
            }
        }
        // Neighbor order is inherited from the sorted source lists and the
        // relabeling is monotone, so arcs are already sorted.
        Ok(Self::from_sorted_arcs(labels, &arcs))
    }

    /// Induced subgraph on all nodes within `k` hops of `root`, together with
    /// the root's id inside the returned graph.
    pub fn k_hop_neighborhood(&self, root: usize, k: usize) -> Result<(LabeledGraph, usize)> {
        if root >= self.node_count() {
            return Err(Error::arg(format!(
                "root {root} is outside 0..{}",
                self.node_count()
            )));
        }
        let nodes: Vec<usize> = self
            .bfs_distances(root)
            .into_iter()
            .enumerate()
            .filter_map(|(v, d)| d.filter(|&d| d <= k).map(|_| v))
            .collect();
        let center = nodes.iter().filter(|&&v| v < root).count();
        Ok((self.induced_subgraph(&nodes)?, center))
    }

    /// Relabels node `v` as `perm[v]`. `perm` must be a permutation of `0..n`.
    pub fn permuted(&self, perm: &[usize]) -> Result<LabeledGraph> {
        let n = self.node_count();
        let mut check = vec![false; n];
        if perm.len() != n {
            return Err(Error::arg("permutation length differs from node count"));
        }
        for &p in perm {
            if p >= n || check[p] {
                return Err(Error::arg("not a permutation"));
            }
            check[p] = true;
        }
        let mut labels = vec![0; n];
        for v in 0..n {
            labels[perm[v]] = self.labels[v];
        }
        let edges: Vec<_> = self.edges().map(|(u, v)| (perm[u], perm[v])).collect();
        LabeledGraph::from_edges(labels, &edges)
    }
}

/// An ordered corpus of graphs sharing one label alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphDataset {
    pub name: String,
    pub graphs: Vec<LabeledGraph>,
    /// Original label value for each dense label id.
    pub label_values: Vec<i64>,
}

impl GraphDataset {
    pub fn new(
        name: impl Into<String>,
        graphs: Vec<LabeledGraph>,
        label_values: Vec<i64>,
    ) -> Result<Self> {
        let alphabet = label_values.len();
        for (i, g) in graphs.iter().enumerate() {
            if let Some(l) = g.max_label() {
                if l as usize >= alphabet {
                    return Err(Error::arg(format!(
                        "graph {i} uses label {l} outside an alphabet of {alphabet}"
                    )));
                }
            }
        }
        Ok(GraphDataset {
            name: name.into(),
            graphs,
            label_values,
        })
    }

    /// Dataset whose original label values are the dense ids themselves.
    pub fn with_identity_labels(
        name: impl Into<String>,
        graphs: Vec<LabeledGraph>,
        alphabet_size: usize,
    ) -> Result<Self> {
        Self::new(name, graphs, (0..alphabet_size as i64).collect())
    }

    pub fn label_alphabet_size(&self) -> usize {
        self.label_values.len()
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }
}
