//! Shared inputs for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use submatch_core::encoder::{EncoderConfig, EncoderParams, GraphEmbedding};
use submatch_core::synthetic::{random_corpus, SyntheticConfig};
use submatch_core::trainer::embed_graphs;
use submatch_core::GraphDataset;

pub fn corpus(num_graphs: usize) -> GraphDataset {
    random_corpus(&SyntheticConfig {
        num_graphs,
        ..SyntheticConfig::default()
    })
    .expect("default synthetic config is valid")
}

pub fn params() -> EncoderParams {
    EncoderParams::init(EncoderConfig::default(), 3, 0).expect("default encoder config is valid")
}

/// Embeddings of a 200-graph corpus and `n` random index pairs into it.
pub fn scoring_inputs(n: usize) -> (Vec<GraphEmbedding>, Vec<(usize, usize)>) {
    let ds = corpus(200);
    let embs = embed_graphs(&params(), &ds.graphs).expect("encoding succeeds");
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pairs = (0..n)
        .map(|_| (rng.random_range(0..embs.len()), rng.random_range(0..embs.len())))
        .collect();
    (embs, pairs)
}
