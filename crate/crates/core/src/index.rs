//! Embedding index over the k-hop neighborhoods of one large graph.
//!
//! A query is reported as matched when its best psi against any node's
//! neighborhood exceeds the decision threshold.

use std::fs;
use std::path::Path;

use crate::encoder::{EncoderParams, GraphEmbedding};
use crate::error::{Error, Result};
use crate::graph::LabeledGraph;
use crate::measure;
use crate::trainer::embed_graphs;

pub const INDEX_MAGIC: &[u8; 8] = b"SUBMIDX1";

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodIndex {
    pub k: usize,
    /// Row `v` embeds the k-hop neighborhood of node `v`.
    pub embeddings: Vec<GraphEmbedding>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexHit {
    pub node: usize,
    pub psi: f64,
}

impl NeighborhoodIndex {
    pub fn build(g: &LabeledGraph, params: &EncoderParams, k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::arg("neighborhood radius k must be at least 1"));
        }
        let hoods: Vec<LabeledGraph> = (0..g.node_count())
            .map(|v| g.k_hop_neighborhood(v, k).map(|(h, _)| h))
            .collect::<Result<_>>()?;
        Ok(NeighborhoodIndex {
            k,
            embeddings: embed_graphs(params, &hoods)?,
        })
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    /// Best-scoring node for a query embedding, lowest id on ties.
    pub fn best(&self, query: &GraphEmbedding) -> Result<Option<IndexHit>> {
        let mut best: Option<IndexHit> = None;
        for (node, e) in self.embeddings.iter().enumerate() {
            let psi = measure::psi(query.as_slice(), e.as_slice())?.psi;
            if best.is_none_or(|b| psi > b.psi) {
                best = Some(IndexHit { node, psi });
            }
        }
        Ok(best)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let dim = self.embeddings.first().map_or(0, GraphEmbedding::dim);
        let mut out = Vec::with_capacity(20 + 8 * dim * self.len());
        out.extend_from_slice(INDEX_MAGIC);
        for x in [self.k, self.len(), dim] {
            out.extend_from_slice(&(x as u32).to_le_bytes());
        }
        for e in &self.embeddings {
            for v in e.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |m: &str| Error::format(path, m.to_string());
        if bytes.len() < 20 || &bytes[..8] != INDEX_MAGIC {
            return Err(bad("not an index file"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().expect("4 bytes")) as usize;
        let (k, n, dim) = (word(0), word(1), word(2));
        let body = &bytes[20..];
        if Some(body.len()) != n.checked_mul(dim).and_then(|x| x.checked_mul(8)) {
            return Err(bad("index size does not match its header"));
        }
        let values: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let embeddings = if dim == 0 {
            vec![GraphEmbedding(Vec::new()); n]
        } else {
            values.chunks(dim).map(|c| GraphEmbedding(c.to_vec())).collect()
        };
        Ok(NeighborhoodIndex { k, embeddings })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{encode_graph, EncoderConfig};
    use crate::synthetic::{random_connected_graph, SyntheticConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> EncoderParams {
        let cfg = EncoderConfig {
            num_layers: 2,
            hidden_dim: 8,
            out_dim: 4,
            ..EncoderConfig::default()
        };
        EncoderParams::init(cfg, 3, 2).unwrap()
    }

    #[test]
    fn build_round_trip_and_query() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_connected_graph(&SyntheticConfig::default(), &mut rng);
        let p = params();
        let idx = NeighborhoodIndex::build(&g, &p, 2).unwrap();
        assert_eq!(idx.len(), g.node_count());
        let again = NeighborhoodIndex::build(&g, &p, 2).unwrap();
        assert_eq!(idx.to_bytes(), again.to_bytes());
        let back = NeighborhoodIndex::from_bytes(&idx.to_bytes(), Path::new("mem")).unwrap();
        assert_eq!(back, idx);

        // a node's own neighborhood scores psi = 1 against itself
        let (hood, _) = g.k_hop_neighborhood(5, 2).unwrap();
        let hit = idx.best(&encode_graph(&hood, &p).unwrap()).unwrap().unwrap();
        assert_eq!(hit.psi, 1.0);
        assert!(NeighborhoodIndex::build(&g, &p, 0).is_err());
    }

    #[test]
    fn corrupt_index_is_rejected() {
        let g = LabeledGraph::from_edges(vec![0, 1, 2], &[(0, 1), (1, 2)]).unwrap();
        let bytes = NeighborhoodIndex::build(&g, &params(), 1).unwrap().to_bytes();
        assert!(NeighborhoodIndex::from_bytes(&bytes[..bytes.len() - 1], Path::new("x")).is_err());
        assert!(NeighborhoodIndex::from_bytes(b"nonsense", Path::new("x")).is_err());
    }
}
