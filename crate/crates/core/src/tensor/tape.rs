//! Operation recording and reverse-mode differentiation.
//!
//! Every primitive appends one node to the tape holding its forward value and
//! enough context to route gradients back to its inputs. Node ids grow in
//! evaluation order, so a reverse sweep over ids is a valid topological order.
//!
//! Subgradient conventions at non-differentiable points: `relu`,
//! `positive_part` and `clamp_min` pass gradient only where the input is
//! strictly inside the linear region; `minimum`/`maximum` route ties to the
//! left operand; max pooling routes ties to the lowest row.

use std::rc::Rc;

use super::{gemm, ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::graph::LabeledGraph;

/// Layer normalization variance floor.
pub const LAYER_NORM_EPS: f64 = 1e-5;
/// Smallest divisor magnitude accepted by `div`.
pub const MIN_DIVISOR: f64 = 1e-12;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

/// Symmetric neighbor structure used by [`Tape::neighbor_sum`]; several
/// graphs may be packed side by side with offset node ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
}

impl Adjacency {
    pub fn from_graph(g: &LabeledGraph) -> Self {
        Self::pack(std::iter::once(g))
    }

    /// Disjoint union of `graphs`, in order.
    pub fn pack<'a>(graphs: impl IntoIterator<Item = &'a LabeledGraph>) -> Self {
        let mut offsets = vec![0];
        let mut neighbors = Vec::new();
        let mut base = 0u32;
        for g in graphs {
            for v in 0..g.node_count() {
                neighbors.extend(g.neighbors(v).iter().map(|&w| w + base));
                offsets.push(neighbors.len());
            }
            base += g.node_count() as u32;
        }
        Adjacency { offsets, neighbors }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    fn neighbors(&self, v: usize) -> &[u32] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Binary {
    Add,
    Sub,
    Mul,
    Div,
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Unary {
    Sigmoid,
    Tanh,
    Relu,
    PositivePart,
    Exp,
    Neg,
}

/// How the right operand of a binary op is stretched to the left's shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Broadcast {
    Same,
    Row,
    Column,
    Scalar,
}

impl Broadcast {
    fn index(self, r: usize, c: usize, cols: usize) -> usize {
        match self {
            Broadcast::Same => r * cols + c,
            Broadcast::Row => c,
            Broadcast::Column => r,
            Broadcast::Scalar => 0,
        }
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Binary(Binary, Var, Var, Broadcast),
    Unary(Unary, Var),
    ClampMin(Var, f64),
    Scale(Var, f64),
    AddScalar(Var),
    RowSum(Var),
    RowMean(Var),
    Sum(Var),
    Mean(Var),
    SegmentMax {
        input: Var,
        bounds: Vec<usize>,
        argmax: Vec<usize>,
    },
    LayerNorm {
        input: Var,
        inv_std: Vec<f64>,
    },
    NeighborSum {
        input: Var,
        adj: Rc<Adjacency>,
    },
    GatherRows {
        input: Var,
        index: Vec<usize>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Recording of one forward computation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every recorded node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// `None` when the node does not influence the differentiated scalar.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

fn shape_err(op: &str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::arg(format!(
        "{op}: incompatible shapes {}x{} and {}x{}",
        a.0, a.1, b.0, b.1
    ))
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// A value that does not take part in differentiation.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// An input whose gradient is reported by [`Tape::gradients`].
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Records the current value of parameter `id`; [`Tape::backward`] adds
    /// its gradient into the store's accumulator.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.value(id).clone(), Op::Param(id), true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(shape_err("matmul", sa, sb));
        }
        let mut out = Tensor::zeros(sa.0, sb.1);
        gemm(self.value(a), false, self.value(b), false, &mut out.data, false);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    fn broadcast(&self, op: &str, a: Var, b: Var) -> Result<Broadcast> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        Ok(if sa == sb {
            Broadcast::Same
        } else if sb == (1, 1) {
            Broadcast::Scalar
        } else if sb == (1, sa.1) {
            Broadcast::Row
        } else if sb == (sa.0, 1) {
            Broadcast::Column
        } else {
            return Err(shape_err(op, sa, sb));
        })
    }

    fn binary(&mut self, kind: Binary, a: Var, b: Var) -> Result<Var> {
        let bc = self.broadcast(&format!("{kind:?}").to_lowercase(), a, b)?;
        let (rows, cols) = self.shape(a);
        let av = self.value(a);
        let bv = self.value(b);
        if kind == Binary::Div {
            if let Some(bad) = bv.data.iter().find(|x| x.abs() < MIN_DIVISOR) {
                return Err(Error::NumericDomain(format!(
                    "division by {bad:e} (magnitude below {MIN_DIVISOR:e})"
                )));
            }
        }
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                let x = av.data[r * cols + c];
                let y = bv.data[bc.index(r, c, cols)];
                out.data[r * cols + c] = match kind {
                    Binary::Add => x + y,
                    Binary::Sub => x - y,
                    Binary::Mul => x * y,
                    Binary::Div => x / y,
                    Binary::Min => x.min(y),
                    Binary::Max => x.max(y),
                };
            }
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Binary(kind, a, b, bc), rg))
    }

    /// Elementwise `a + b`; `b` may be a row, column or scalar broadcast.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Mul, a, b)
    }

    /// Fails with a numeric-domain error if any divisor is below `1e-12` in magnitude.
    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Div, a, b)
    }

    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Min, a, b)
    }

    pub fn maximum(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Max, a, b)
    }

    fn unary(&mut self, kind: Unary, a: Var) -> Var {
        let f: fn(f64) -> f64 = match kind {
            Unary::Sigmoid => |x| 1.0 / (1.0 + (-x).exp()),
            Unary::Tanh => f64::tanh,
            Unary::Relu | Unary::PositivePart => |x| if x > 0.0 { x } else { 0.0 },
            Unary::Exp => f64::exp,
            Unary::Neg => |x| -x,
        };
        let out = map(self.value(a), f);
        let rg = self.rg(a);
        self.push(out, Op::Unary(kind, a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(Unary::Sigmoid, a)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(Unary::Tanh, a)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(Unary::Relu, a)
    }

    /// Hinge `[x]+ = max(0, x)`.
    pub fn positive_part(&mut self, a: Var) -> Var {
        self.unary(Unary::PositivePart, a)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(Unary::Exp, a)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.unary(Unary::Neg, a)
    }

    pub fn clamp_min(&mut self, a: Var, floor: f64) -> Var {
        let out = map(self.value(a), |x| x.max(floor));
        let rg = self.rg(a);
        self.push(out, Op::ClampMin(a, floor), rg)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = map(self.value(a), |x| x * s);
        let rg = self.rg(a);
        self.push(out, Op::Scale(a, s), rg)
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Var {
        let out = map(self.value(a), |x| x + s);
        let rg = self.rg(a);
        self.push(out, Op::AddScalar(a), rg)
    }

    /// `r x c -> r x 1`.
    pub fn row_sum(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let out = Tensor::column((0..v.rows).map(|r| v.row_slice(r).iter().sum()).collect());
        let rg = self.rg(a);
        self.push(out, Op::RowSum(a), rg)
    }

    pub fn row_mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let c = v.cols as f64;
        let out = Tensor::column(
            (0..v.rows)
                .map(|r| v.row_slice(r).iter().sum::<f64>() / c)
                .collect(),
        );
        let rg = self.rg(a);
        self.push(out, Op::RowMean(a), rg)
    }

    /// Sum of all entries, `1 x 1`.
    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).data.iter().sum());
        let rg = self.rg(a);
        self.push(out, Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a);
        if v.is_empty() {
            return Err(Error::arg("mean of an empty tensor"));
        }
        let out = Tensor::scalar(v.data.iter().sum::<f64>() / v.len() as f64);
        let rg = self.rg(a);
        Ok(self.push(out, Op::Mean(a), rg))
    }

    /// Column-wise maximum over all rows, `r x c -> 1 x c`.
    pub fn column_max(&mut self, a: Var) -> Result<Var> {
        let rows = self.shape(a).0;
        self.segment_max(a, &[0, rows])
    }

    /// Column-wise maximum within each row range `bounds[s]..bounds[s + 1]`,
    /// producing one output row per segment. Ties go to the lowest row.
    pub fn segment_max(&mut self, a: Var, bounds: &[usize]) -> Result<Var> {
        let (rows, cols) = self.shape(a);
        if bounds.len() < 2
            || bounds[0] != 0
            || *bounds.last().unwrap_or(&0) != rows
            || bounds.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::arg(
                "segment bounds must start at 0, end at the row count and strictly increase",
            ));
        }
        let v = self.value(a);
        let segments = bounds.len() - 1;
        let mut out = Tensor::zeros(segments, cols);
        let mut argmax = vec![0usize; segments * cols];
        for s in 0..segments {
            for c in 0..cols {
                let mut best = bounds[s];
                for r in bounds[s] + 1..bounds[s + 1] {
                    if v.data[r * cols + c] > v.data[best * cols + c] {
                        best = r;
                    }
                }
                argmax[s * cols + c] = best;
                out.data[s * cols + c] = v.data[best * cols + c];
            }
        }
        let rg = self.rg(a);
        Ok(self.push(
            out,
            Op::SegmentMax {
                input: a,
                bounds: bounds.to_vec(),
                argmax,
            },
            rg,
        ))
    }

    /// Row-wise normalization to zero mean and unit variance (no affine part).
    pub fn layer_norm(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let (rows, cols) = v.shape();
        let mut out = Tensor::zeros(rows, cols);
        let mut inv_std = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = v.row_slice(r);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / cols as f64;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for c in 0..cols {
                out.data[r * cols + c] = (row[c] - mean) * is;
            }
            inv_std.push(is);
        }
        let rg = self.rg(a);
        self.push(out, Op::LayerNorm { input: a, inv_std }, rg)
    }

    /// Row `v` of the result is the sum of rows `u` over the neighbors of `v`,
    /// visited in ascending id order. Isolated nodes yield zero rows.
    pub fn neighbor_sum(&mut self, a: Var, adj: &Rc<Adjacency>) -> Result<Var> {
        let (rows, cols) = self.shape(a);
        if rows != adj.node_count() {
            return Err(Error::arg(format!(
                "neighbor_sum: {rows} rows for {} nodes",
                adj.node_count()
            )));
        }
        let v = self.value(a);
        let mut out = Tensor::zeros(rows, cols);
        for node in 0..rows {
            let dst = &mut out.data[node * cols..(node + 1) * cols];
            for &u in adj.neighbors(node) {
                let src = v.row_slice(u as usize);
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
        let rg = self.rg(a);
        Ok(self.push(
            out,
            Op::NeighborSum {
                input: a,
                adj: Rc::clone(adj),
            },
            rg,
        ))
    }

    /// Selects rows `index[i]` into row `i` of the result.
    pub fn gather_rows(&mut self, a: Var, index: &[usize]) -> Result<Var> {
        let (rows, cols) = self.shape(a);
        if let Some(&bad) = index.iter().find(|&&i| i >= rows) {
            return Err(Error::arg(format!("gather_rows: row {bad} outside 0..{rows}")));
        }
        let v = self.value(a);
        let mut data = Vec::with_capacity(index.len() * cols);
        for &i in index {
            data.extend_from_slice(v.row_slice(i));
        }
        let out = Tensor::from_vec(index.len(), cols, data)?;
        let rg = self.rg(a);
        Ok(self.push(
            out,
            Op::GatherRows {
                input: a,
                index: index.to_vec(),
            },
            rg,
        ))
    }

    /// Reverse sweep from the scalar `loss`.
    pub fn gradients(&self, loss: Var) -> Result<Gradients> {
        if self.shape(loss) != (1, 1) {
            let (r, c) = self.shape(loss);
            return Err(Error::arg(format!("backward from a {r}x{c} value, expected a scalar")));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            if node.requires_grad {
                self.propagate(node, &g, &mut grads);
            }
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }

    /// Accumulates d`loss`/d`param` into `store` for every recorded parameter.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<()> {
        let grads = self.gradients(loss)?;
        for (node, g) in self.nodes.iter().zip(&grads.grads) {
            if let (Op::Param(id), Some(g)) = (&node.op, g) {
                store.accumulate_grad(*id, g)?;
            }
        }
        Ok(())
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let out = &node.value;
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.rg(*a) {
                    let ga = slot(grads, *a, av.shape());
                    gemm(g, false, bv, true, &mut ga.data, true);
                }
                if self.rg(*b) {
                    let gb = slot(grads, *b, bv.shape());
                    gemm(av, true, g, false, &mut gb.data, true);
                }
            }
            Op::Binary(kind, a, b, bc) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (rows, cols) = av.shape();
                let (need_a, need_b) = (self.rg(*a), self.rg(*b));
                let mut ga = need_a.then(|| Tensor::zeros(rows, cols));
                let mut gb = need_b.then(|| Tensor::zeros(bv.rows, bv.cols));
                for r in 0..rows {
                    for c in 0..cols {
                        let i = r * cols + c;
                        let j = bc.index(r, c, cols);
                        let (x, y, gi) = (av.data[i], bv.data[j], g.data[i]);
                        let (da, db) = match kind {
                            Binary::Add => (gi, gi),
                            Binary::Sub => (gi, -gi),
                            Binary::Mul => (gi * y, gi * x),
                            Binary::Div => (gi / y, -gi * x / (y * y)),
                            Binary::Min => {
                                if x <= y {
                                    (gi, 0.0)
                                } else {
                                    (0.0, gi)
                                }
                            }
                            Binary::Max => {
                                if x >= y {
                                    (gi, 0.0)
                                } else {
                                    (0.0, gi)
                                }
                            }
                        };
                        if let Some(ga) = ga.as_mut() {
                            ga.data[i] += da;
                        }
                        if let Some(gb) = gb.as_mut() {
                            gb.data[j] += db;
                        }
                    }
                }
                if let Some(ga) = ga {
                    add_into(slot(grads, *a, (rows, cols)), &ga);
                }
                if let Some(gb) = gb {
                    add_into(slot(grads, *b, bv.shape()), &gb);
                }
            }
            Op::Unary(kind, a) => {
                let x = self.value(*a);
                let ga = slot(grads, *a, x.shape());
                for i in 0..g.data.len() {
                    let y = out.data[i];
                    ga.data[i] += g.data[i]
                        * match kind {
                            Unary::Sigmoid => y * (1.0 - y),
                            Unary::Tanh => 1.0 - y * y,
                            Unary::Relu | Unary::PositivePart => {
                                if x.data[i] > 0.0 {
                                    1.0
                                } else {
                                    0.0
                                }
                            }
                            Unary::Exp => y,
                            Unary::Neg => -1.0,
                        };
                }
            }
            Op::ClampMin(a, floor) => {
                let x = self.value(*a);
                let ga = slot(grads, *a, x.shape());
                for i in 0..g.data.len() {
                    if x.data[i] > *floor {
                        ga.data[i] += g.data[i];
                    }
                }
            }
            Op::Scale(a, s) => {
                let ga = slot(grads, *a, out.shape());
                for (d, gi) in ga.data.iter_mut().zip(&g.data) {
                    *d += gi * s;
                }
            }
            Op::AddScalar(a) => add_into(slot(grads, *a, out.shape()), g),
            Op::RowSum(a) | Op::RowMean(a) => {
                let shape = self.shape(*a);
                let k = if matches!(node.op, Op::RowMean(_)) {
                    1.0 / shape.1 as f64
                } else {
                    1.0
                };
                let ga = slot(grads, *a, shape);
                for r in 0..shape.0 {
                    for c in 0..shape.1 {
                        ga.data[r * shape.1 + c] += g.data[r] * k;
                    }
                }
            }
            Op::Sum(a) | Op::Mean(a) => {
                let shape = self.shape(*a);
                let k = if matches!(node.op, Op::Mean(_)) {
                    1.0 / (shape.0 * shape.1) as f64
                } else {
                    1.0
                };
                let ga = slot(grads, *a, shape);
                for d in ga.data.iter_mut() {
                    *d += g.data[0] * k;
                }
            }
            Op::SegmentMax { input, argmax, .. } => {
                let shape = self.shape(*input);
                let cols = shape.1;
                let ga = slot(grads, *input, shape);
                for (k, &row) in argmax.iter().enumerate() {
                    ga.data[row * cols + k % cols] += g.data[k];
                }
            }
            Op::LayerNorm { input, inv_std } => {
                let shape = self.shape(*input);
                let cols = shape.1;
                let ga = slot(grads, *input, shape);
                for (r, is) in inv_std.iter().enumerate() {
                    let gy = &g.data[r * cols..(r + 1) * cols];
                    let y = &out.data[r * cols..(r + 1) * cols];
                    let mean_g = gy.iter().sum::<f64>() / cols as f64;
                    let mean_gy = gy.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / cols as f64;
                    for c in 0..cols {
                        ga.data[r * cols + c] += is * (gy[c] - mean_g - y[c] * mean_gy);
                    }
                }
            }
            Op::NeighborSum { input, adj } => {
                let shape = self.shape(*input);
                let cols = shape.1;
                let ga = slot(grads, *input, shape);
                for node in 0..shape.0 {
                    let src = &g.data[node * cols..(node + 1) * cols];
                    for &u in adj.neighbors(node) {
                        let dst = &mut ga.data[u as usize * cols..(u as usize + 1) * cols];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += s;
                        }
                    }
                }
            }
            Op::GatherRows { input, index } => {
                let shape = self.shape(*input);
                let cols = shape.1;
                let ga = slot(grads, *input, shape);
                for (i, &row) in index.iter().enumerate() {
                    for c in 0..cols {
                        ga.data[row * cols + c] += g.data[i * cols + c];
                    }
                }
            }
        }
    }

    /// Smallest distance from any recorded input to a point where a
    /// differentiated primitive is non-smooth (relu/hinge/clamp thresholds,
    /// min/max ties, runner-up gaps in max pooling). Finite-difference checks
    /// are only meaningful when this exceeds the probe step.
    pub fn kink_margin(&self) -> f64 {
        let mut margin = f64::INFINITY;
        for node in self.nodes.iter().filter(|n| n.requires_grad) {
            match &node.op {
                Op::Unary(Unary::Relu | Unary::PositivePart, a) => {
                    for x in &self.value(*a).data {
                        margin = margin.min(x.abs());
                    }
                }
                Op::ClampMin(a, floor) => {
                    for x in &self.value(*a).data {
                        margin = margin.min((x - floor).abs());
                    }
                }
                Op::Binary(Binary::Min | Binary::Max, a, b, bc) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let cols = av.cols;
                    for r in 0..av.rows {
                        for c in 0..cols {
                            let d = av.data[r * cols + c] - bv.data[bc.index(r, c, cols)];
                            margin = margin.min(d.abs());
                        }
                    }
                }
                Op::SegmentMax {
                    input,
                    bounds,
                    argmax,
                } => {
                    let v = self.value(*input);
                    let cols = v.cols;
                    for (k, &win) in argmax.iter().enumerate() {
                        let (s, c) = (k / cols, k % cols);
                        let best = v.data[win * cols + c];
                        for r in (bounds[s]..bounds[s + 1]).filter(|&r| r != win) {
                            margin = margin.min(best - v.data[r * cols + c]);
                        }
                    }
                }
                _ => {}
            }
        }
        margin
    }
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor {
        rows: t.rows,
        cols: t.cols,
        data: t.data.iter().map(|&x| f(x)).collect(),
    }
}

fn slot(grads: &mut [Option<Tensor>], v: Var, shape: (usize, usize)) -> &mut Tensor {
    grads[v.0].get_or_insert_with(|| Tensor::zeros(shape.0, shape.1))
}

fn add_into(dst: &mut Tensor, src: &Tensor) {
    for (d, s) in dst.data.iter_mut().zip(&src.data) {
        *d += s;
    }
}
