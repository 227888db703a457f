//! Hierarchy-aware graph encoder.
//!
//! One-hot labels pass through a linear preprocessor into `2d` channels. Each
//! of the `K` message-passing layers sums neighbor states and merges the sum
//! with the node's own previous state through a GRU cell: the aggregated
//! neighborhood is the GRU input and the previous root state is the hidden
//! state, so root and neighbors play different roles. Between layers the
//! states are layer-normalized and rectified.
//!
//! Every layer output is hashed by one shared two-layer MLP down to `d`
//! channels, max-pooled over the graph's nodes, projected by one shared
//! linear map, and the `K` per-layer summaries are averaged. The result is
//! clamped from below so the measure's ratios stay defined.

use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LabeledGraph;
use crate::tensor::{Adjacency, ParamId, ParamStore, Tape, Tensor, Var};

/// Lower bound applied to every embedding coordinate.
pub const CLAMP_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineMode {
    Gru,
    /// `h' = m + h`: the bias-free, order-blind combine used as an ablation.
    SumAblation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderConfig {
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub out_dim: usize,
    pub combine_mode: CombineMode,
    pub aggregator: Aggregator,
    pub clamp_floor: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            num_layers: 6,
            hidden_dim: 64,
            out_dim: 32,
            combine_mode: CombineMode::Gru,
            aggregator: Aggregator::Sum,
            clamp_floor: CLAMP_FLOOR,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 {
            return Err(Error::arg("encoder needs at least one layer"));
        }
        if self.out_dim == 0 || self.hidden_dim != 2 * self.out_dim {
            return Err(Error::arg(format!(
                "hidden_dim ({}) must be twice a positive out_dim ({})",
                self.hidden_dim, self.out_dim
            )));
        }
        if !(self.clamp_floor > 0.0) {
            return Err(Error::arg("clamp_floor must be positive"));
        }
        Ok(())
    }
}

/// Parameter ids of one GRU cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruIds {
    pub w_z: ParamId,
    pub u_z: ParamId,
    pub b_z: ParamId,
    pub w_r: ParamId,
    pub u_r: ParamId,
    pub b_r: ParamId,
    pub w_h: ParamId,
    pub u_h: ParamId,
    pub b_h: ParamId,
}

/// A GRU cell's parameters recorded on a tape.
#[derive(Debug, Clone, Copy)]
pub struct GruVars {
    pub w_z: Var,
    pub u_z: Var,
    pub b_z: Var,
    pub w_r: Var,
    pub u_r: Var,
    pub b_r: Var,
    pub w_h: Var,
    pub u_h: Var,
    pub b_h: Var,
}

impl GruIds {
    pub fn bind(&self, tape: &mut Tape, store: &ParamStore) -> GruVars {
        GruVars {
            w_z: tape.param(store, self.w_z),
            u_z: tape.param(store, self.u_z),
            b_z: tape.param(store, self.b_z),
            w_r: tape.param(store, self.w_r),
            u_r: tape.param(store, self.u_r),
            b_r: tape.param(store, self.b_r),
            w_h: tape.param(store, self.w_h),
            u_h: tape.param(store, self.u_h),
            b_h: tape.param(store, self.b_h),
        }
    }
}

/// Learned weights of the encoder; all arrays live in `store`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub config: EncoderConfig,
    pub label_alphabet_size: usize,
    pub store: ParamStore,
    pre_w: ParamId,
    pre_b: ParamId,
    layers: Vec<GruIds>,
    hash_w1: ParamId,
    hash_b1: ParamId,
    hash_w2: ParamId,
    hash_b2: ParamId,
    post_w: ParamId,
    post_b: ParamId,
}

/// Parameter names and shapes in canonical order.
fn layout(cfg: &EncoderConfig, alphabet: usize) -> Vec<(String, usize, usize)> {
    let (h, d) = (cfg.hidden_dim, cfg.out_dim);
    let mut v = vec![
        ("pre.weight".to_string(), alphabet, h),
        ("pre.bias".to_string(), 1, h),
    ];
    for j in 0..cfg.num_layers {
        for gate in ["z", "r", "h"] {
            v.push((format!("gru{j}.w_{gate}"), h, h));
            v.push((format!("gru{j}.u_{gate}"), h, h));
            v.push((format!("gru{j}.b_{gate}"), 1, h));
        }
    }
    v.extend([
        ("hash.0.weight".to_string(), h, d),
        ("hash.0.bias".to_string(), 1, d),
        ("hash.1.weight".to_string(), d, d),
        ("hash.1.bias".to_string(), 1, d),
        ("post.weight".to_string(), d, d),
        ("post.bias".to_string(), 1, d),
    ]);
    v
}

impl EncoderParams {
    /// Glorot-uniform weights, zero biases, deterministic in `seed`.
    pub fn init(cfg: EncoderConfig, label_alphabet_size: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if label_alphabet_size == 0 {
            return Err(Error::arg("label alphabet is empty"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        for (name, r, c) in layout(&cfg, label_alphabet_size) {
            let t = if r == 1 {
                Tensor::zeros(r, c)
            } else {
                let a = (6.0 / (r + c) as f64).sqrt();
                Tensor::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-a..a)).collect())?
            };
            store.add(name, t);
        }
        Self::from_store(cfg, label_alphabet_size, store)
    }

    /// Wraps a store whose names and shapes follow the encoder layout.
    pub fn from_store(cfg: EncoderConfig, label_alphabet_size: usize, store: ParamStore) -> Result<Self> {
        cfg.validate()?;
        let expected = layout(&cfg, label_alphabet_size);
        if expected.len() != store.len() {
            return Err(Error::arg(format!(
                "expected {} parameter arrays, found {}",
                expected.len(),
                store.len()
            )));
        }
        for ((name, r, c), id) in expected.iter().zip(store.ids()) {
            if store.name(id) != name || store.value(id).shape() != (*r, *c) {
                return Err(Error::arg(format!(
                    "parameter {} {:?} does not match expected {name} ({r}, {c})",
                    store.name(id),
                    store.value(id).shape()
                )));
            }
        }
        let id = |name: &str| store.find(name).expect("layout checked");
        let layers = (0..cfg.num_layers)
            .map(|j| GruIds {
                w_z: id(&format!("gru{j}.w_z")),
                u_z: id(&format!("gru{j}.u_z")),
                b_z: id(&format!("gru{j}.b_z")),
                w_r: id(&format!("gru{j}.w_r")),
                u_r: id(&format!("gru{j}.u_r")),
                b_r: id(&format!("gru{j}.b_r")),
                w_h: id(&format!("gru{j}.w_h")),
                u_h: id(&format!("gru{j}.u_h")),
                b_h: id(&format!("gru{j}.b_h")),
            })
            .collect();
        Ok(EncoderParams {
            config: cfg,
            label_alphabet_size,
            pre_w: id("pre.weight"),
            pre_b: id("pre.bias"),
            layers,
            hash_w1: id("hash.0.weight"),
            hash_b1: id("hash.0.bias"),
            hash_w2: id("hash.1.weight"),
            hash_b2: id("hash.1.bias"),
            post_w: id("post.weight"),
            post_b: id("post.bias"),
            store,
        })
    }

    pub fn gru_layer(&self, j: usize) -> &GruIds {
        &self.layers[j]
    }

    fn bind(&self, tape: &mut Tape, store: &ParamStore) -> Bound {
        Bound {
            pre_w: tape.param(store, self.pre_w),
            pre_b: tape.param(store, self.pre_b),
            layers: match self.config.combine_mode {
                CombineMode::Gru => self.layers.iter().map(|l| l.bind(tape, store)).collect(),
                CombineMode::SumAblation => Vec::new(),
            },
            hash_w1: tape.param(store, self.hash_w1),
            hash_b1: tape.param(store, self.hash_b1),
            hash_w2: tape.param(store, self.hash_w2),
            hash_b2: tape.param(store, self.hash_b2),
            post_w: tape.param(store, self.post_w),
            post_b: tape.param(store, self.post_b),
        }
    }
}

struct Bound {
    pre_w: Var,
    pre_b: Var,
    layers: Vec<GruVars>,
    hash_w1: Var,
    hash_b1: Var,
    hash_w2: Var,
    hash_b2: Var,
    post_w: Var,
    post_b: Var,
}

fn linear(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var> {
    let xw = tape.matmul(x, w)?;
    tape.add(xw, b)
}

/// Standard GRU update applied row-wise:
///
/// ```text
/// z  = sigmoid(x W_z + h U_z + b_z)
/// r  = sigmoid(x W_r + h U_r + b_r)
/// h~ = tanh(x W_h + (r * h) U_h + b_h)
/// h' = (1 - z) * h + z * h~
/// ```
pub fn gru_cell(tape: &mut Tape, x: Var, h: Var, p: &GruVars) -> Result<Var> {
    if tape.shape(x) != tape.shape(h) {
        return Err(Error::arg(format!(
            "gru input {:?} and hidden state {:?} differ in shape",
            tape.shape(x),
            tape.shape(h)
        )));
    }
    let gate = |tape: &mut Tape, w: Var, u: Var, b: Var, hidden: Var| -> Result<Var> {
        let xw = tape.matmul(x, w)?;
        let hu = tape.matmul(hidden, u)?;
        let s = tape.add(xw, hu)?;
        tape.add(s, b)
    };
    let z_pre = gate(tape, p.w_z, p.u_z, p.b_z, h)?;
    let z = tape.sigmoid(z_pre);
    let r_pre = gate(tape, p.w_r, p.u_r, p.b_r, h)?;
    let r = tape.sigmoid(r_pre);
    let rh = tape.mul(r, h)?;
    let c_pre = gate(tape, p.w_h, p.u_h, p.b_h, rh)?;
    let candidate = tape.tanh(c_pre);
    let neg_z = tape.neg(z);
    let keep = tape.add_scalar(neg_z, 1.0);
    let kept = tape.mul(keep, h)?;
    let fresh = tape.mul(z, candidate)?;
    tape.add(kept, fresh)
}

/// Node-level encoder outputs for one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEmbeddings {
    /// Combined states `H^1..H^K`, each `|V| x 2d`.
    pub layers: Vec<Tensor>,
    /// Hashed layer outputs, each `|V| x d`.
    pub hashed: Vec<Tensor>,
    /// Per-node mean over layers of the projected hashed rows, clamped; `|V| x d`.
    pub summary: Tensor,
}

impl NodeEmbeddings {
    pub fn node_count(&self) -> usize {
        self.summary.rows()
    }

    pub fn node(&self, v: usize) -> &[f64] {
        self.summary.row_slice(v)
    }
}

/// Graph-level embedding; every coordinate is at least the clamp floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEmbedding(pub Vec<f64>);

impl GraphEmbedding {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Tape handles produced by [`forward`].
#[derive(Debug, Clone)]
pub struct Forward {
    /// `B x d` clamped graph embeddings, one row per input graph.
    pub graphs: Var,
    /// Present when node outputs were requested.
    pub nodes: Option<NodeForward>,
}

#[derive(Debug, Clone)]
pub struct NodeForward {
    pub layers: Vec<Var>,
    pub hashed: Vec<Var>,
    /// `N x d` clamped node summaries over all packed graphs.
    pub summary: Var,
    /// Row ranges of each graph within the packed node matrices.
    pub bounds: Vec<usize>,
}

fn one_hot(graphs: &[&LabeledGraph], alphabet: usize) -> Result<Tensor> {
    let n: usize = graphs.iter().map(|g| g.node_count()).sum();
    let mut t = Tensor::zeros(n, alphabet);
    let mut row = 0;
    for g in graphs {
        for &l in g.labels() {
            if l as usize >= alphabet {
                return Err(Error::arg(format!(
                    "label {l} outside the encoder's alphabet of {alphabet}"
                )));
            }
            t.data_mut()[row * alphabet + l as usize] = 1.0;
            row += 1;
        }
    }
    Ok(t)
}

/// Records the encoder on `tape` for a batch of graphs packed as one disjoint
/// union. Parameters are read from `store` (normally `params.store`).
pub fn forward(
    tape: &mut Tape,
    params: &EncoderParams,
    store: &ParamStore,
    graphs: &[&LabeledGraph],
    with_nodes: bool,
) -> Result<Forward> {
    let cfg = &params.config;
    if graphs.is_empty() {
        return Err(Error::arg("forward needs at least one graph"));
    }
    let mut bounds = vec![0];
    for g in graphs {
        if g.node_count() == 0 {
            return Err(Error::arg("cannot encode an empty graph"));
        }
        bounds.push(bounds.last().copied().unwrap_or(0) + g.node_count());
    }
    let p = params.bind(tape, store);
    let x = tape.constant(one_hot(graphs, params.label_alphabet_size)?);
    let adj = Rc::new(Adjacency::pack(graphs.iter().copied()));

    let mut h = linear(tape, x, p.pre_w, p.pre_b)?;
    let mut graph_acc: Option<Var> = None;
    let mut node_acc: Option<Var> = None;
    let mut layers = Vec::new();
    let mut hashed_layers = Vec::new();
    for j in 0..cfg.num_layers {
        let m = match cfg.aggregator {
            Aggregator::Sum => tape.neighbor_sum(h, &adj)?,
        };
        let combined = match cfg.combine_mode {
            CombineMode::Gru => gru_cell(tape, m, h, &p.layers[j])?,
            CombineMode::SumAblation => tape.add(m, h)?,
        };
        let hidden = linear(tape, combined, p.hash_w1, p.hash_b1)?;
        let hidden = tape.relu(hidden);
        let hashed = linear(tape, hidden, p.hash_w2, p.hash_b2)?;

        let pooled = tape.segment_max(hashed, &bounds)?;
        let projected = linear(tape, pooled, p.post_w, p.post_b)?;
        graph_acc = Some(match graph_acc {
            None => projected,
            Some(acc) => tape.add(acc, projected)?,
        });
        if with_nodes {
            let node_proj = linear(tape, hashed, p.post_w, p.post_b)?;
            node_acc = Some(match node_acc {
                None => node_proj,
                Some(acc) => tape.add(acc, node_proj)?,
            });
            layers.push(combined);
            hashed_layers.push(hashed);
        }

        h = if j + 1 < cfg.num_layers {
            let normed = tape.layer_norm(combined);
            tape.relu(normed)
        } else {
            combined
        };
    }

    let k = 1.0 / cfg.num_layers as f64;
    let acc = graph_acc.expect("at least one layer");
    let mean = tape.scale(acc, k);
    let graphs_var = tape.clamp_min(mean, cfg.clamp_floor);
    let nodes = match node_acc {
        Some(acc) => {
            let mean = tape.scale(acc, k);
            Some(NodeForward {
                layers,
                hashed: hashed_layers,
                summary: tape.clamp_min(mean, cfg.clamp_floor),
                bounds,
            })
        }
        None => None,
    };
    Ok(Forward {
        graphs: graphs_var,
        nodes,
    })
}

/// Node-level outputs for one graph.
pub fn encode_nodes(g: &LabeledGraph, params: &EncoderParams) -> Result<NodeEmbeddings> {
    let mut tape = Tape::new();
    let fwd = forward(&mut tape, params, &params.store, &[g], true)?;
    let nodes = fwd.nodes.expect("requested node outputs");
    Ok(NodeEmbeddings {
        layers: nodes.layers.iter().map(|&v| tape.value(v).clone()).collect(),
        hashed: nodes.hashed.iter().map(|&v| tape.value(v).clone()).collect(),
        summary: tape.value(nodes.summary).clone(),
    })
}

pub fn encode_graph(g: &LabeledGraph, params: &EncoderParams) -> Result<GraphEmbedding> {
    let mut tape = Tape::new();
    let fwd = forward(&mut tape, params, &params.store, &[g], false)?;
    Ok(GraphEmbedding(tape.value(fwd.graphs).data().to_vec()))
}

/// Embeddings of several graphs, in input order, computed in one packed pass.
pub fn encode_batch(graphs: &[&LabeledGraph], params: &EncoderParams) -> Result<Vec<GraphEmbedding>> {
    if graphs.is_empty() {
        return Ok(Vec::new());
    }
    let mut tape = Tape::new();
    let fwd = forward(&mut tape, params, &params.store, graphs, false)?;
    let out = tape.value(fwd.graphs);
    Ok((0..out.rows())
        .map(|r| GraphEmbedding(out.row_slice(r).to_vec()))
        .collect())
}
