//! Evaluation metrics: AUROC, threshold calibration, Spearman's rho and
//! Hit@K for node alignment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::ScoreBreakdown;
use crate::oracle::NodeMapping;

/// Mann-Whitney AUROC: the fraction of (positive, negative) pairs ordered
/// correctly, ties counting one half.
pub fn auroc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::arg("auroc needs at least one positive and one negative"));
    }
    if pos.iter().chain(neg).any(|x| x.is_nan()) {
        return Err(Error::NumericDomain("NaN score".into()));
    }
    let mut neg_sorted = neg.to_vec();
    neg_sorted.sort_by(f64::total_cmp);
    let mut credit = 0.0;
    for &p in pos {
        let below = neg_sorted.partition_point(|&n| n < p);
        let not_above = neg_sorted.partition_point(|&n| n <= p);
        credit += below as f64 + 0.5 * (not_above - below) as f64;
    }
    Ok(credit / (pos.len() as f64 * neg.len() as f64))
}

/// Decision threshold: a pair is predicted matched iff `score > tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub tau: f64,
    pub accuracy: f64,
}

impl Threshold {
    pub fn predict(&self, score: f64) -> bool {
        score > self.tau
    }
}

pub fn accuracy_at(pos: &[f64], neg: &[f64], tau: f64) -> f64 {
    let correct = pos.iter().filter(|&&p| p > tau).count() + neg.iter().filter(|&&n| n <= tau).count();
    correct as f64 / (pos.len() + neg.len()) as f64
}

/// Sweeps midpoints between adjacent distinct scores plus the two extremes
/// (everything positive, everything negative) and keeps the most accurate
/// threshold, smallest on ties.
pub fn calibrate_threshold(pos: &[f64], neg: &[f64]) -> Result<Threshold> {
    if pos.is_empty() && neg.is_empty() {
        return Err(Error::arg("calibration needs at least one score"));
    }
    if pos.iter().chain(neg).any(|x| !x.is_finite()) {
        return Err(Error::NumericDomain("non-finite score".into()));
    }
    let mut all: Vec<f64> = pos.iter().chain(neg).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    let mut candidates = Vec::with_capacity(all.len() + 1);
    candidates.push(all[0].next_down());
    candidates.extend(all.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    candidates.push(all[all.len() - 1]);

    let mut labelled: Vec<(f64, bool)> = pos
        .iter()
        .map(|&p| (p, true))
        .chain(neg.iter().map(|&n| (n, false)))
        .collect();
    labelled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total = labelled.len();
    // start with every score above tau: correct = positives
    let mut correct = pos.len();
    let mut idx = 0;
    let mut best = Threshold {
        tau: candidates[0],
        accuracy: -1.0,
    };
    for &tau in &candidates {
        while idx < total && labelled[idx].0 <= tau {
            if labelled[idx].1 {
                correct -= 1;
            } else {
                correct += 1;
            }
            idx += 1;
        }
        let acc = correct as f64 / total as f64;
        if acc > best.accuracy {
            best = Threshold { tau, accuracy: acc };
        }
    }
    Ok(best)
}

/// 1-based ranks, tied values sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// `1 - 6 sum d^2 / (n (n^2 - 1))` over average ranks. `None` below two items.
pub fn spearman_rho(predicted: &[f64], truth: &[f64]) -> Result<Option<f64>> {
    if predicted.len() != truth.len() {
        return Err(Error::arg("spearman inputs differ in length"));
    }
    let n = predicted.len();
    if n < 2 {
        return Ok(None);
    }
    let (rp, rt) = (average_ranks(predicted), average_ranks(truth));
    let d2: f64 = rp.iter().zip(&rt).map(|(a, b)| (a - b) * (a - b)).sum();
    let n = n as f64;
    Ok(Some(1.0 - 6.0 * d2 / (n * (n * n - 1.0))))
}

/// Data nodes ordered by descending psi for query node `v`, lowest id first
/// on ties.
pub fn ranked_candidates(row: &[ScoreBreakdown]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[b].psi.total_cmp(&row[a].psi).then(a.cmp(&b)));
    order
}

/// Fraction of query nodes whose mapped data node is among their `k`
/// best-scoring data nodes.
pub fn hit_at_k(mapping: &NodeMapping, node_scores: &[Vec<ScoreBreakdown>], k: usize) -> Result<f64> {
    if mapping.len() != node_scores.len() {
        return Err(Error::arg(format!(
            "mapping covers {} query nodes, score matrix has {} rows",
            mapping.len(),
            node_scores.len()
        )));
    }
    if node_scores.is_empty() {
        return Err(Error::arg("empty score matrix"));
    }
    let mut hits = 0;
    for (v, row) in node_scores.iter().enumerate() {
        let target = mapping.get(v);
        if target >= row.len() {
            return Err(Error::arg(format!("mapping target {target} outside data graph")));
        }
        if ranked_candidates(row).iter().take(k).any(|&u| u == target) {
            hits += 1;
        }
    }
    Ok(hits as f64 / node_scores.len() as f64)
}

/// Median and range of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    };
    Some(Summary {
        median,
        min: v[0],
        max: v[n - 1],
        count: n,
    })
}

/// Counts of scores in equal-width bins over `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Histogram {
    let mut counts = vec![0; bins.max(1)];
    let width = (hi - lo) / counts.len() as f64;
    for &x in values {
        let b = ((x - lo) / width).floor();
        let b = if b < 0.0 { 0 } else { (b as usize).min(counts.len() - 1) };
        counts[b] += 1;
    }
    Histogram { lo, hi, counts }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::psi;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.9, 0.8], &[0.1, 0.2]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.8, 0.2], &[0.6, 0.4]).unwrap(), 0.5);
        assert_eq!(auroc(&[0.5], &[0.5]).unwrap(), 0.5);
        assert!(auroc(&[], &[0.5]).is_err());
    }

    fn brute_auroc(pos: &[f64], neg: &[f64]) -> f64 {
        let mut s = 0.0;
        for &p in pos {
            for &n in neg {
                s += if p > n { 1.0 } else if p == n { 0.5 } else { 0.0 };
            }
        }
        s / (pos.len() * neg.len()) as f64
    }

    #[test]
    fn calibration_examples() {
        let t = calibrate_threshold(&[0.9, 0.7], &[0.2, 0.4]).unwrap();
        assert!((t.tau - 0.55).abs() < 1e-12);
        assert_eq!(t.accuracy, 1.0);
        let t = calibrate_threshold(&[0.8], &[0.3]).unwrap();
        assert!((t.tau - 0.55).abs() < 1e-12);
        // interleaved: pos 0.1 0.3, neg 0.2 0.4
        let t = calibrate_threshold(&[0.1, 0.3], &[0.2, 0.4]).unwrap();
        assert_eq!(t.accuracy, 0.5);
        assert_eq!(t.tau, 0.1f64.next_down());
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman_rho(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap(), Some(0.5));
        assert_eq!(spearman_rho(&[3.0, 1.0, 2.0], &[3.0, 1.0, 2.0]).unwrap(), Some(1.0));
        assert_eq!(spearman_rho(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]).unwrap(), Some(-1.0));
        assert_eq!(spearman_rho(&[1.0], &[1.0]).unwrap(), None);
        assert_eq!(average_ranks(&[5.0, 1.0, 5.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn hit_at_k_examples() {
        let distinct: Vec<Vec<f64>> = (0..4).map(|i| vec![1.0 + i as f64, 4.0 - i as f64]).collect();
        let scores: Vec<Vec<ScoreBreakdown>> = distinct
            .iter()
            .map(|q| distinct.iter().map(|d| psi(q, d).unwrap()).collect())
            .collect();
        let id = NodeMapping::identity(4);
        assert_eq!(hit_at_k(&id, &scores, 1).unwrap(), 1.0);
        assert_eq!(hit_at_k(&id, &scores, 4).unwrap(), 1.0);

        // constant matrix: only data nodes 0..k can be hits
        let same = psi(&[1.0], &[1.0]).unwrap();
        let flat = vec![vec![same; 5]; 5];
        let m = NodeMapping::new(vec![4, 3, 2, 1, 0]);
        for k in 1..=5 {
            assert_eq!(hit_at_k(&m, &flat, k).unwrap(), k as f64 / 5.0);
        }
    }

    proptest::proptest! {
        #[test]
        fn auroc_matches_pair_count_and_is_rank_based(
            pos in proptest::collection::vec(-3i32..3, 1..12),
            neg in proptest::collection::vec(-3i32..3, 1..12),
        ) {
            let p: Vec<f64> = pos.iter().map(|&x| x as f64 * 0.5).collect();
            let n: Vec<f64> = neg.iter().map(|&x| x as f64 * 0.5).collect();
            let a = auroc(&p, &n).unwrap();
            proptest::prop_assert_eq!(a, brute_auroc(&p, &n));
            let tp: Vec<f64> = p.iter().map(|x| x.exp() * 3.0 + 1.0).collect();
            let tn: Vec<f64> = n.iter().map(|x| x.exp() * 3.0 + 1.0).collect();
            proptest::prop_assert_eq!(auroc(&tp, &tn).unwrap(), a);
        }

        #[test]
        fn calibration_is_optimal_over_observed_scores(
            pos in proptest::collection::vec(0u8..20, 0..10),
            neg in proptest::collection::vec(0u8..20, 1..10),
        ) {
            let p: Vec<f64> = pos.iter().map(|&x| x as f64 / 20.0).collect();
            let n: Vec<f64> = neg.iter().map(|&x| x as f64 / 20.0).collect();
            let t = calibrate_threshold(&p, &n).unwrap();
            let mut grid: Vec<f64> = p.iter().chain(&n).copied().collect();
            grid.push(-1.0);
            let best = grid.iter().map(|&g| accuracy_at(&p, &n, g)).fold(0.0, f64::max);
            proptest::prop_assert_eq!(t.accuracy, best);
            proptest::prop_assert_eq!(accuracy_at(&p, &n, t.tau), t.accuracy);
        }
    }

    #[test]
    fn hit_at_k_is_monotone_in_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let q: Vec<Vec<f64>> = (0..3).map(|_| (0..4).map(|_| rng.random_range(0.1..1.0)).collect()).collect();
            let d: Vec<Vec<f64>> = (0..6).map(|_| (0..4).map(|_| rng.random_range(0.1..1.0)).collect()).collect();
            let scores: Vec<Vec<ScoreBreakdown>> = q
                .iter()
                .map(|a| d.iter().map(|b| psi(a, b).unwrap()).collect())
                .collect();
            let m = NodeMapping::new(vec![rng.random_range(0..6), rng.random_range(0..6), rng.random_range(0..6)]);
            let hits: Vec<f64> = (1..=6).map(|k| hit_at_k(&m, &scores, k).unwrap()).collect();
            assert!(hits.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(hits[5], 1.0);
        }
    }

    #[test]
    fn summaries() {
        let s = summarize(&[3.0, 1.0, 2.0, 10.0]).unwrap();
        assert_eq!((s.median, s.min, s.max, s.count), (2.5, 1.0, 10.0, 4));
        assert!(summarize(&[]).is_none());
        assert_eq!(histogram(&[-1.0, 0.0, 0.5, 1.0], -1.0, 1.0, 2).counts, vec![1, 3]);
    }
}
