//! Cross-module checks: sampled pair sets, the oracle and the measure.

use std::time::Duration;

use submatch_core::checkpoint::Checkpoint;
use submatch_core::encoder::{encode_graph, EncoderConfig, EncoderParams};
use submatch_core::measure::psi;
use submatch_core::oracle::find_subgraph_isomorphism;
use submatch_core::pairs::sample_pair_set;
use submatch_core::sampler::{build_split, SamplerConfig};
use submatch_core::synthetic::{random_corpus, SyntheticConfig};
use submatch_core::trainer::evaluate;
use submatch_core::{PairLabel, SdrReduction};

fn corpus() -> submatch_core::GraphDataset {
    random_corpus(&SyntheticConfig {
        num_graphs: 30,
        node_range: [10, 16],
        ..SyntheticConfig::default()
    })
    .unwrap()
}

#[test]
fn sampled_labels_agree_with_the_oracle() {
    let ds = corpus();
    let cfg = SamplerConfig {
        data_walk_range: [6, 10],
        ..SamplerConfig::default()
    };
    let split = build_split(ds.len(), 2);
    let set = sample_pair_set(&ds, &split.test, 40, &cfg, 8).unwrap();
    for i in 0..set.len() {
        let (q, d, label) = set.pair(i);
        let out = find_subgraph_isomorphism(q, d, Duration::from_secs(5)).unwrap();
        assert_eq!(Some(out.is_match()), label.as_bool(), "pair {i}");
    }
}

#[test]
fn checkpoint_round_trip_preserves_scores() {
    let ds = corpus();
    let cfg = SamplerConfig {
        data_walk_range: [6, 10],
        ..SamplerConfig::default()
    };
    let set = sample_pair_set(&ds, &[0, 1, 2, 3, 4], 20, &cfg, 3).unwrap();
    let enc = EncoderConfig {
        num_layers: 3,
        hidden_dim: 16,
        out_dim: 8,
        ..EncoderConfig::default()
    };
    let params = EncoderParams::init(enc, 3, 4).unwrap();
    let ckpt = Checkpoint::new(params.clone(), ds.label_values.clone()).unwrap();
    let back = Checkpoint::from_bytes(&ckpt.to_bytes().unwrap(), "mem".as_ref()).unwrap();
    let a = evaluate(&params, &set, None, SdrReduction::Aggregate).unwrap();
    let b = evaluate(&back.params, &set, None, SdrReduction::Aggregate).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.positives, set.count(PairLabel::Positive));
}

#[test]
fn graph_scored_against_itself_is_one() {
    let ds = corpus();
    let params = EncoderParams::init(EncoderConfig::default(), 3, 0).unwrap();
    for g in ds.graphs.iter().take(5) {
        let e = encode_graph(g, &params).unwrap();
        assert_eq!(psi(e.as_slice(), e.as_slice()).unwrap().psi, 1.0);
    }
}
