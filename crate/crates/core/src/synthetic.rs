//! Generated corpora for tests, benchmarks and desk-scale experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphDataset, LabeledGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub num_graphs: usize,
    /// Inclusive node-count range.
    pub node_range: [usize; 2],
    pub num_labels: usize,
    /// Extra edges beyond a spanning tree, as a multiple of the node count;
    /// each graph draws its own factor from this range.
    pub extra_edge_range: [f64; 2],
    /// Single-label cliques instead of random graphs; see [`separable_corpus`].
    pub separable: bool,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            num_graphs: 200,
            node_range: [20, 40],
            num_labels: 3,
            extra_edge_range: [0.0, 1.5],
            separable: false,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.node_range;
        if lo < 1 || lo > hi {
            return Err(Error::arg(format!("bad node_range [{lo}, {hi}]")));
        }
        if self.num_labels == 0 {
            return Err(Error::arg("num_labels must be positive"));
        }
        let [a, b] = self.extra_edge_range;
        if !(a >= 0.0 && a <= b) {
            return Err(Error::arg(format!("bad extra_edge_range [{a}, {b}]")));
        }
        Ok(())
    }
}

/// Random spanning tree plus a random number of extra edges, uniform labels.
pub fn random_connected_graph<R: Rng + ?Sized>(cfg: &SyntheticConfig, rng: &mut R) -> LabeledGraph {
    let n = rng.random_range(cfg.node_range[0]..=cfg.node_range[1]);
    let labels = (0..n).map(|_| rng.random_range(0..cfg.num_labels as u32)).collect();
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.random_range(0..v), v)).collect();
    let [a, b] = cfg.extra_edge_range;
    let factor = if a < b { rng.random_range(a..=b) } else { a };
    let extra = (factor * n as f64).round() as usize;
    if n > 1 {
        for _ in 0..extra {
            let u = rng.random_range(0..n);
            let v = rng.random_range(0..n);
            if u != v {
                edges.push((u, v));
            }
        }
    }
    LabeledGraph::from_edges(labels, &edges).expect("generated edges are valid")
}

pub fn random_corpus(cfg: &SyntheticConfig) -> Result<GraphDataset> {
    cfg.validate()?;
    if cfg.separable {
        return separable_corpus(cfg);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let graphs = (0..cfg.num_graphs).map(|_| random_connected_graph(cfg, &mut rng)).collect();
    GraphDataset::with_identity_labels("synthetic", graphs, cfg.num_labels)
}

/// Cliques whose nodes all carry one label, graph `i` using label
/// `i mod num_labels`. A query is contained in a data graph exactly when it
/// has the same label and no more nodes, so matched and unmatched pairs are
/// separated by label counts alone.
pub fn separable_corpus(cfg: &SyntheticConfig) -> Result<GraphDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let graphs = (0..cfg.num_graphs)
        .map(|i| {
            let n = rng.random_range(cfg.node_range[0]..=cfg.node_range[1]);
            let label = (i % cfg.num_labels) as u32;
            let edges: Vec<_> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
            LabeledGraph::from_edges(vec![label; n], &edges).expect("clique edges are valid")
        })
        .collect();
    GraphDataset::with_identity_labels("separable", graphs, cfg.num_labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_corpus_shape() {
        let ds = random_corpus(&SyntheticConfig::default()).unwrap();
        assert_eq!(ds.len(), 200);
        assert_eq!(ds.label_alphabet_size(), 3);
        for g in &ds.graphs {
            assert!(g.is_connected());
            assert!((20..=40).contains(&g.node_count()));
        }
        let densities: Vec<f64> = ds
            .graphs
            .iter()
            .map(|g| g.edge_count() as f64 / g.node_count() as f64)
            .collect();
        let lo = densities.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = densities.iter().cloned().fold(0.0, f64::max);
        assert!(hi - lo > 0.8, "{lo} {hi}");
        assert_eq!(ds, random_corpus(&SyntheticConfig::default()).unwrap());
    }

    #[test]
    fn separable_corpus_shape() {
        let cfg = SyntheticConfig {
            num_graphs: 10,
            node_range: [4, 6],
            num_labels: 4,
            separable: true,
            ..SyntheticConfig::default()
        };
        let ds = random_corpus(&cfg).unwrap();
        for (i, g) in ds.graphs.iter().enumerate() {
            let n = g.node_count();
            assert_eq!(g.edge_count(), n * (n - 1) / 2);
            assert!(g.labels().iter().all(|&l| l as usize == i % 4));
        }
    }
}
