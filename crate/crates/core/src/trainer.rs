//! Training loop, threshold calibration, evaluation and chain ranking.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::encoder::{self, EncoderConfig, EncoderParams, GraphEmbedding};
use crate::error::{Error, Result};
use crate::graph::LabeledGraph;
use crate::measure::{self, psi_on_tape, ScoreBreakdown, ScoreMode, SdrReduction};
use crate::metrics::{self, Threshold};
use crate::oracle::PairLabel;
use crate::pairs::PairSet;
use crate::sampler::{sample_triplet_batch, SamplerConfig, Triplet};
use crate::tensor::{adam_step, AdamConfig, AdamState, Tape, Tensor, Var};

/// Graphs encoded per packed forward pass during evaluation.
pub const EVAL_CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub iters_per_epoch: usize,
    pub warmup_epochs: usize,
    pub patience: usize,
    pub target_pos: f64,
    pub target_neg: f64,
    pub max_epochs: usize,
    pub sdr_reduction: SdrReduction,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            batch_size: 64,
            iters_per_epoch: 100,
            warmup_epochs: 10,
            patience: 50,
            target_pos: 1.0,
            target_neg: -1.0,
            max_epochs: 100,
            sdr_reduction: SdrReduction::Aggregate,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let in_range = |t: f64| t > -1.0 - 1e-12 && t <= 1.0;
        if !in_range(self.target_pos) || !in_range(self.target_neg) {
            return Err(Error::arg("targets must lie in [-1, 1]"));
        }
        if self.patience == 0 || self.batch_size == 0 || self.iters_per_epoch == 0 {
            return Err(Error::arg("patience, batch_size and iters_per_epoch must be positive"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::arg("lr must be a finite non-negative number"));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }
}

/// Mean squared difference between a column of scores and `targets`.
pub fn mse_loss(tape: &mut Tape, scores: Var, targets: &[f64]) -> Result<Var> {
    if tape.shape(scores) != (targets.len(), 1) {
        return Err(Error::arg(format!(
            "{:?} scores for {} targets",
            tape.shape(scores),
            targets.len()
        )));
    }
    let t = tape.constant(Tensor::column(targets.to_vec()));
    let diff = tape.sub(scores, t)?;
    let sq = tape.mul(diff, diff)?;
    tape.mean(sq)
}

/// Records encoder, measure and loss for a batch of triplets; returns the
/// loss variable.
pub fn triplet_loss(
    tape: &mut Tape,
    params: &EncoderParams,
    triplets: &[Triplet],
    cfg: &TrainConfig,
) -> Result<Var> {
    let n = triplets.len();
    if n == 0 {
        return Err(Error::arg("empty triplet batch"));
    }
    let mut graphs: Vec<&LabeledGraph> = Vec::with_capacity(3 * n);
    graphs.extend(triplets.iter().map(|t| &t.data));
    graphs.extend(triplets.iter().map(|t| &t.positive));
    graphs.extend(triplets.iter().map(|t| &t.negative));
    let fwd = encoder::forward(tape, params, &params.store, &graphs, false)?;
    let q_rows: Vec<usize> = (n..3 * n).collect();
    let d_rows: Vec<usize> = (0..n).chain(0..n).collect();
    let q = tape.gather_rows(fwd.graphs, &q_rows)?;
    let d = tape.gather_rows(fwd.graphs, &d_rows)?;
    let scores = psi_on_tape(tape, q, d, cfg.sdr_reduction)?;
    let targets: Vec<f64> = std::iter::repeat_n(cfg.target_pos, n)
        .chain(std::iter::repeat_n(cfg.target_neg, n))
        .collect();
    mse_loss(tape, scores.psi, &targets)
}

/// Loss of a single labeled pair: encode both graphs, score, square error.
pub fn pair_loss(
    tape: &mut Tape,
    params: &EncoderParams,
    query: &LabeledGraph,
    data: &LabeledGraph,
    target: f64,
    reduction: SdrReduction,
) -> Result<Var> {
    let fwd = encoder::forward(tape, params, &params.store, &[query, data], false)?;
    let q = tape.gather_rows(fwd.graphs, &[0])?;
    let d = tape.gather_rows(fwd.graphs, &[1])?;
    let scores = psi_on_tape(tape, q, d, reduction)?;
    mse_loss(tape, scores.psi, &[target])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub val_auroc: Option<f64>,
}

/// Training log as CSV with columns `epoch,loss,val_auroc`; the last is
/// empty during warm-up.
pub fn log_csv(log: &[EpochLog]) -> String {
    let mut out = String::from("epoch,loss,val_auroc\n");
    for e in log {
        let auc = e.val_auroc.map(|a| a.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", e.epoch, e.loss, auc));
    }
    out
}

/// Everything needed to continue training exactly where it stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: EncoderParams,
    pub adam: AdamState,
    pub best: EncoderParams,
    pub best_auroc: Option<f64>,
    /// Epochs completed.
    pub epoch: usize,
    pub since_best: usize,
    pub log: Vec<EpochLog>,
    pub stopped_early: bool,
}

impl TrainState {
    pub fn new(params: EncoderParams, cfg: &TrainConfig) -> Self {
        let adam = AdamState::new(&params.store, cfg.adam());
        TrainState {
            best: params.clone(),
            params,
            adam,
            best_auroc: None,
            epoch: 0,
            since_best: 0,
            log: Vec::new(),
            stopped_early: false,
        }
    }

    pub fn is_finished(&self, cfg: &TrainConfig) -> bool {
        self.stopped_early || self.epoch >= cfg.max_epochs
    }

    /// Resume checkpoint: current parameters, optimizer state and progress.
    pub fn to_checkpoint(&self, label_values: Vec<i64>) -> Result<Checkpoint> {
        let mut c = Checkpoint::new(self.params.clone(), label_values)?;
        c.adam = Some(self.adam.clone());
        c.meta = serde_json::json!({
            "epoch": self.epoch,
            "since_best": self.since_best,
            "best_auroc": self.best_auroc,
            "stopped_early": self.stopped_early,
            "log": self.log,
        });
        Ok(c)
    }

    /// Inverse of [`TrainState::to_checkpoint`]; `best` is the best-so-far
    /// encoder saved alongside it.
    pub fn from_checkpoint(last: Checkpoint, best: EncoderParams) -> Result<Self> {
        let adam = last
            .adam
            .ok_or_else(|| Error::arg("checkpoint has no optimizer state to resume from"))?;
        let meta = last.meta;
        let field = |k: &str| meta.get(k).ok_or_else(|| Error::arg(format!("checkpoint meta lacks {k}")));
        Ok(TrainState {
            params: last.params,
            adam,
            best,
            best_auroc: serde_json::from_value(field("best_auroc")?.clone())?,
            epoch: serde_json::from_value(field("epoch")?.clone())?,
            since_best: serde_json::from_value(field("since_best")?.clone())?,
            log: serde_json::from_value(field("log")?.clone())?,
            stopped_early: serde_json::from_value(field("stopped_early")?.clone())?,
        })
    }
}

/// Training data: triplets are sampled on the fly from `corpus[pool]`;
/// validation uses the fixed pair set `val`.
pub struct TrainData<'a> {
    pub corpus: &'a [LabeledGraph],
    pub pool: &'a [usize],
    pub val: &'a PairSet,
    pub sampler: &'a SamplerConfig,
}

/// Runs one epoch: `iters_per_epoch` Adam steps, then validation once the
/// warm-up is over. Returns the epoch's log line.
pub fn train_epoch(state: &mut TrainState, data: &TrainData<'_>, cfg: &TrainConfig) -> Result<EpochLog> {
    let mut loss_sum = 0.0;
    for it in 0..cfg.iters_per_epoch {
        let global = (state.epoch * cfg.iters_per_epoch + it) as u64;
        let batch = sample_triplet_batch(
            data.corpus,
            data.pool,
            cfg.batch_size,
            global * cfg.batch_size as u64,
            data.sampler,
            cfg.seed,
        )?;
        if batch.failures * 2 > cfg.batch_size {
            return Err(Error::Training(format!(
                "{} of {} triplets in iteration {global} found no negative",
                batch.failures, cfg.batch_size
            )));
        }
        let mut tape = Tape::new();
        let loss = triplet_loss(&mut tape, &state.params, &batch.triplets, cfg)?;
        let value = tape.value(loss).item()?;
        if !value.is_finite() {
            return Err(Error::Training(format!("non-finite loss in iteration {global}")));
        }
        loss_sum += value;
        tape.backward(loss, &mut state.params.store)?;
        adam_step(&mut state.params.store, &mut state.adam);
    }
    state.epoch += 1;
    let mut line = EpochLog {
        epoch: state.epoch,
        loss: loss_sum / cfg.iters_per_epoch as f64,
        val_auroc: None,
    };
    if state.epoch > cfg.warmup_epochs {
        let auc = evaluate(&state.params, data.val, None, cfg.sdr_reduction)?.auroc;
        line.val_auroc = Some(auc);
        if state.best_auroc.is_none_or(|b| auc > b) {
            state.best_auroc = Some(auc);
            state.best = state.params.clone();
            state.since_best = 0;
        } else {
            state.since_best += 1;
            if state.since_best >= cfg.patience {
                state.stopped_early = true;
            }
        }
    } else {
        // until validation starts the latest parameters are the best known
        state.best = state.params.clone();
    }
    log::info!(
        "epoch {} loss {:.6} val_auroc {}",
        line.epoch,
        line.loss,
        line.val_auroc.map(|a| format!("{a:.4}")).unwrap_or_else(|| "-".into())
    );
    state.log.push(line);
    Ok(line)
}

/// Trains until early stopping or `max_epochs`, then calibrates the
/// threshold of the best encoder on the validation pairs.
pub fn train(state: &mut TrainState, data: &TrainData<'_>, cfg: &TrainConfig) -> Result<Threshold> {
    cfg.validate()?;
    data.sampler.validate()?;
    if data.val.count(PairLabel::Positive) == 0 || data.val.count(PairLabel::Negative) == 0 {
        return Err(Error::Training("validation set needs positive and negative pairs".into()));
    }
    while !state.is_finished(cfg) {
        train_epoch(state, data, cfg)?;
    }
    Ok(evaluate(&state.best, data.val, None, cfg.sdr_reduction)?.calibrated)
}

/// Convenience wrapper: fresh parameters from `enc_cfg` and `seed`.
pub fn train_new(
    data: &TrainData<'_>,
    alphabet: usize,
    enc_cfg: EncoderConfig,
    cfg: &TrainConfig,
) -> Result<(TrainState, Threshold)> {
    let params = EncoderParams::init(enc_cfg, alphabet, cfg.seed)?;
    let mut state = TrainState::new(params, cfg);
    let tau = train(&mut state, data, cfg)?;
    Ok((state, tau))
}

/// Embeddings of `graphs` in order, encoded in parallel chunks.
pub fn embed_graphs(params: &EncoderParams, graphs: &[LabeledGraph]) -> Result<Vec<GraphEmbedding>> {
    let chunks: Vec<Vec<GraphEmbedding>> = graphs
        .par_chunks(EVAL_CHUNK)
        .map(|chunk| {
            let refs: Vec<&LabeledGraph> = chunk.iter().collect();
            encoder::encode_batch(&refs, params)
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub query: usize,
    pub data: usize,
    pub label: String,
    pub psi: f64,
    pub compliance: f64,
    pub sdr: f64,
    pub hinge: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auroc: f64,
    /// Accuracy at the supplied threshold, if any.
    pub accuracy: Option<f64>,
    /// Best threshold on this very set.
    pub calibrated: Threshold,
    pub positives: usize,
    pub negatives: usize,
    pub unknown: usize,
    pub scores: Vec<PairScore>,
}

/// Scores every pair of `pairs`; AUROC and calibration ignore `unknown`
/// labels.
pub fn evaluate(
    params: &EncoderParams,
    pairs: &PairSet,
    threshold: Option<Threshold>,
    reduction: SdrReduction,
) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::arg("empty pair set"));
    }
    if pairs.label_alphabet_size() != params.label_alphabet_size {
        return Err(Error::arg(format!(
            "pair set uses {} labels, encoder expects {}",
            pairs.label_alphabet_size(),
            params.label_alphabet_size
        )));
    }
    let q_emb = embed_graphs(params, &pairs.queries)?;
    let d_emb = embed_graphs(params, &pairs.data)?;
    let mut scores = Vec::with_capacity(pairs.len());
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for p in &pairs.pairs {
        let s = measure::psi_with(q_emb[p.query].as_slice(), d_emb[p.data].as_slice(), reduction)?;
        match p.label {
            PairLabel::Positive => pos.push(s.psi),
            PairLabel::Negative => neg.push(s.psi),
            PairLabel::Unknown => {}
        }
        scores.push(PairScore {
            query: p.query,
            data: p.data,
            label: p.label.to_string(),
            psi: s.psi,
            compliance: s.compliance,
            sdr: s.sdr,
            hinge: s.hinge,
        });
    }
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::arg("evaluation needs labeled positive and negative pairs"));
    }
    Ok(EvalReport {
        auroc: metrics::auroc(&pos, &neg)?,
        accuracy: threshold.map(|t| metrics::accuracy_at(&pos, &neg, t.tau)),
        calibrated: metrics::calibrate_threshold(&pos, &neg)?,
        positives: pos.len(),
        negatives: neg.len(),
        unknown: pairs.len() - pos.len() - neg.len(),
        scores,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankResult {
    pub scores: Vec<f64>,
    pub rho: f64,
    /// Chains shorter than two have no defined correlation; `rho` is then 1.
    pub degenerate: bool,
}

/// Scores chain members against `d` and correlates the scores with the
/// nesting order (more nodes ranks higher).
pub fn rank_chain(
    d: &GraphEmbedding,
    chain: &[GraphEmbedding],
    sizes: &[usize],
    mode: ScoreMode,
) -> Result<RankResult> {
    let scores: Vec<f64> = chain
        .iter()
        .map(|q| measure::psi(q.as_slice(), d.as_slice()).map(|s: ScoreBreakdown| s.score(mode)))
        .collect::<Result<_>>()?;
    let truth: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    Ok(match metrics::spearman_rho(&scores, &truth)? {
        Some(rho) => RankResult {
            scores,
            rho,
            degenerate: false,
        },
        None => RankResult {
            scores,
            rho: 1.0,
            degenerate: true,
        },
    })
}

pub fn rank_queries(
    d: &LabeledGraph,
    chain: &[LabeledGraph],
    params: &EncoderParams,
    mode: ScoreMode,
) -> Result<RankResult> {
    let d_emb = encoder::encode_graph(d, params)?;
    let embs = embed_graphs(params, chain)?;
    let sizes: Vec<usize> = chain.iter().map(LabeledGraph::node_count).collect();
    rank_chain(&d_emb, &embs, &sizes, mode)
}
