use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use submatch_bench::{corpus, params, scoring_inputs};
use submatch_core::encoder::{encode_batch, encode_graph};
use submatch_core::measure::psi;
use submatch_core::oracle::find_subgraph_isomorphism;
use submatch_core::sampler::{sample_data_graph, sample_positive, SamplerConfig};

fn scoring(c: &mut Criterion) {
    let (embs, pairs) = scoring_inputs(10_000);
    c.bench_function("score_10k_pairs", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for &(i, j) in &pairs {
                acc += psi(embs[i].as_slice(), embs[j].as_slice()).unwrap().psi;
            }
            black_box(acc)
        })
    });
}

fn encoding(c: &mut Criterion) {
    let ds = corpus(64);
    let p = params();
    c.bench_function("encode_one_graph", |b| b.iter(|| encode_graph(black_box(&ds.graphs[0]), &p).unwrap()));
    let refs: Vec<_> = ds.graphs.iter().collect();
    c.bench_function("encode_batch_64", |b| b.iter(|| encode_batch(black_box(&refs), &p).unwrap()));
}

fn oracle(c: &mut Criterion) {
    let ds = corpus(20);
    let cfg = SamplerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cases: Vec<_> = ds
        .graphs
        .iter()
        .map(|g| {
            let d = sample_data_graph(g, &cfg, &mut rng).unwrap();
            let q = sample_positive(&d, &cfg, &mut rng).unwrap();
            (q, d)
        })
        .collect();
    c.bench_function("oracle_20_positive_pairs", |b| {
        b.iter(|| {
            for (q, d) in &cases {
                black_box(find_subgraph_isomorphism(q, d, Duration::from_secs(1)).unwrap());
            }
        })
    });
}

criterion_group!(benches, scoring, encoding, oracle);
criterion_main!(benches);
