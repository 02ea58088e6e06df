//! Reverse-mode differentiation over a tape of 2-D `f64` tensors.
//!
//! Values are computed eagerly as nodes are pushed. [`Graph::grad`] walks the
//! tape backwards and expresses every vector-Jacobian product with ordinary
//! graph operations, so the returned gradients are themselves nodes and can be
//! differentiated again. That is what the gradient penalty needs: the norm of
//! the critic's input gradient is a function of the critic parameters.
//!
//! Batch normalization has a fused backward rule that is first-order only.

mod backward;
mod params;

use ndarray::{s, Array2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, Gumbel};

use crate::error::{Error, Result};

pub use params::{AdamConfig, ParamRecord, ParamStore};

pub type Tensor = Array2<f64>;

/// Lower clamp applied inside logarithms; below it the log is constant.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Train or eval behaviour for dropout and batch normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[allow(dead_code)]
#[derive(Debug, Clone)]
pub(crate) enum Op {
    Leaf,
    MatMul { a: NodeId, b: NodeId, ta: bool, tb: bool },
    AddRow { x: NodeId, row: NodeId },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Affine { x: NodeId, scale: f64, shift: f64 },
    Square(NodeId),
    Sqrt(NodeId),
    Recip(NodeId),
    ClampedLog { x: NodeId, floor: f64 },
    ClampedRecip { x: NodeId, floor: f64 },
    LeakyRelu { x: NodeId, slope: f64 },
    LeakyReluGrad { g: NodeId, x: NodeId, slope: f64 },
    Tanh(NodeId),
    Softmax(NodeId),
    LogSoftmax(NodeId),
    SumRows(NodeId),
    BroadcastRows { x: NodeId, rows: usize },
    SumCols(NodeId),
    BroadcastCols { x: NodeId, cols: usize },
    SumAll(NodeId),
    BroadcastScalar { x: NodeId, rows: usize, cols: usize },
    Concat(Vec<NodeId>),
    Slice { x: NodeId, start: usize, width: usize },
    Pad { x: NodeId, start: usize, total: usize },
    Reshape { x: NodeId, rows: usize, cols: usize },
    BatchNorm { x: NodeId, gamma: NodeId, beta: NodeId },
    BatchNormGradInput { bn: NodeId, g: NodeId },
    BatchNormGradGamma { bn: NodeId, g: NodeId },
}

impl Op {
    pub(crate) fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul { .. } => "matmul",
            Op::AddRow { .. } => "add_row",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Affine { .. } => "affine_scalar",
            Op::Square(_) => "square",
            Op::Sqrt(_) => "sqrt",
            Op::Recip(_) => "recip",
            Op::ClampedLog { .. } => "log",
            Op::ClampedRecip { .. } => "clamped_recip",
            Op::LeakyRelu { .. } => "leaky_relu",
            Op::LeakyReluGrad { .. } => "leaky_relu_grad",
            Op::Tanh(_) => "tanh",
            Op::Softmax(_) => "softmax",
            Op::LogSoftmax(_) => "log_softmax",
            Op::SumRows(_) => "sum_rows",
            Op::BroadcastRows { .. } => "broadcast_rows",
            Op::SumCols(_) => "sum_cols",
            Op::BroadcastCols { .. } => "broadcast_cols",
            Op::SumAll(_) => "sum_all",
            Op::BroadcastScalar { .. } => "broadcast_scalar",
            Op::Concat(_) => "concat",
            Op::Slice { .. } => "slice",
            Op::Pad { .. } => "pad",
            Op::Reshape { .. } => "reshape",
            Op::BatchNorm { .. } => "batch_norm",
            Op::BatchNormGradInput { .. } => "batch_norm_grad_input",
            Op::BatchNormGradGamma { .. } => "batch_norm_grad_gamma",
        }
    }

    pub(crate) fn inputs(&self) -> Vec<NodeId> {
        match self {
            Op::Leaf => vec![],
            Op::MatMul { a, b, .. } => vec![*a, *b],
            Op::AddRow { x, row } => vec![*x, *row],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => vec![*a, *b],
            Op::Affine { x, .. }
            | Op::ClampedLog { x, .. }
            | Op::ClampedRecip { x, .. }
            | Op::LeakyRelu { x, .. }
            | Op::BroadcastRows { x, .. }
            | Op::BroadcastCols { x, .. }
            | Op::BroadcastScalar { x, .. }
            | Op::Slice { x, .. }
            | Op::Pad { x, .. }
            | Op::Reshape { x, .. } => vec![*x],
            Op::Square(x)
            | Op::Sqrt(x)
            | Op::Recip(x)
            | Op::Tanh(x)
            | Op::Softmax(x)
            | Op::LogSoftmax(x)
            | Op::SumRows(x)
            | Op::SumCols(x)
            | Op::SumAll(x) => vec![*x],
            Op::LeakyReluGrad { g, x, .. } => vec![*g, *x],
            Op::Concat(xs) => xs.clone(),
            Op::BatchNorm { x, gamma, beta } => vec![*x, *gamma, *beta],
            Op::BatchNormGradInput { bn, g } | Op::BatchNormGradGamma { bn, g } => vec![*bn, *g],
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BnCache {
    xhat: Tensor,
    inv_std: Tensor,
    batch_stats: bool,
}

#[derive(Debug)]
pub(crate) struct Node {
    pub(crate) op: Op,
    pub(crate) value: Tensor,
    pub(crate) bn: Option<BnCache>,
}

/// Batch statistics produced by a training-mode batch normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    /// Unbiased variance (divides by `B - 1`).
    pub var: Vec<f64>,
}

/// Normalization source for [`Graph::batch_norm`].
#[derive(Debug, Clone, Copy)]
pub enum BatchNormMode<'a> {
    /// Normalize with the statistics of the current batch.
    Batch { eps: f64 },
    /// Normalize with fixed running statistics.
    Running { mean: &'a [f64], var: &'a [f64], eps: f64 },
}

#[derive(Debug, Default)]
pub struct Graph {
    pub(crate) nodes: Vec<Node>,
}

fn shape_err(op: &'static str, detail: String) -> Error {
    Error::ShapeMismatch { op, detail }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value[[0, 0]]
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        self.nodes[id.0].value.dim()
    }

    /// Values are computed as nodes are created; this checks the root is
    /// finite and hands its value back.
    pub fn forward(&self, root: NodeId) -> Result<&Tensor> {
        let v = self.value(root);
        if v.iter().all(|x| x.is_finite()) {
            Ok(v)
        } else {
            Err(Error::NonFiniteIntermediate {
                op: self.nodes[root.0].op.name(),
            })
        }
    }

    fn push(&mut self, op: Op, value: Tensor) -> Result<NodeId> {
        self.push_with(op, value, None)
    }

    fn push_with(&mut self, op: Op, value: Tensor, bn: Option<BnCache>) -> Result<NodeId> {
        if !value.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteIntermediate { op: op.name() });
        }
        self.nodes.push(Node { op, value, bn });
        Ok(NodeId(self.nodes.len() - 1))
    }

    /// A parameter, input or constant.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.nodes.push(Node {
            op: Op::Leaf,
            value,
            bn: None,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, rows: usize, cols: usize, fill: f64) -> NodeId {
        self.leaf(Array2::from_elem((rows, cols), fill))
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(op, format!("{:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        Ok(())
    }

    /// `op(a) * op(b)` where `op` optionally transposes.
    pub fn matmul_t(&mut self, a: NodeId, b: NodeId, ta: bool, tb: bool) -> Result<NodeId> {
        let av = self.value(a);
        let bv = self.value(b);
        let av = if ta { av.t() } else { av.view() };
        let bv = if tb { bv.t() } else { bv.view() };
        if av.ncols() != bv.nrows() {
            return Err(shape_err("matmul", format!("{:?} x {:?}", av.dim(), bv.dim())));
        }
        let v = av.dot(&bv);
        self.push(Op::MatMul { a, b, ta, tb }, v)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.matmul_t(a, b, false, false)
    }

    /// Adds a `1 x n` row to every row of `x`.
    pub fn add_row(&mut self, x: NodeId, row: NodeId) -> Result<NodeId> {
        let (_, n) = self.shape(x);
        if self.shape(row) != (1, n) {
            return Err(shape_err(
                "add_row",
                format!("{:?} + {:?}", self.shape(x), self.shape(row)),
            ));
        }
        let v = self.value(x) + self.value(row);
        self.push(Op::AddRow { x, row }, v)
    }

    /// `x Wᵀ + b` with `W` of shape `out x in` and `b` of shape `1 x out`.
    pub fn linear(&mut self, x: NodeId, weight: NodeId, bias: NodeId) -> Result<NodeId> {
        let h = self.matmul_t(x, weight, false, true)?;
        self.add_row(h, bias)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("add", a, b)?;
        let v = self.value(a) + self.value(b);
        self.push(Op::Add(a, b), v)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("sub", a, b)?;
        let v = self.value(a) - self.value(b);
        self.push(Op::Sub(a, b), v)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("mul", a, b)?;
        let v = self.value(a) * self.value(b);
        self.push(Op::Mul(a, b), v)
    }

    /// Elementwise `scale * x + shift`.
    pub fn affine(&mut self, x: NodeId, scale: f64, shift: f64) -> Result<NodeId> {
        let v = self.value(x).mapv(|e| scale * e + shift);
        self.push(Op::Affine { x, scale, shift }, v)
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> Result<NodeId> {
        self.affine(x, c, 0.0)
    }

    pub fn square(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.value(x).mapv(|e| e * e);
        self.push(Op::Square(x), v)
    }

    pub fn sqrt(&mut self, x: NodeId) -> Result<NodeId> {
        if self.value(x).iter().any(|&e| e < 0.0) {
            return Err(Error::NonFiniteIntermediate { op: "sqrt" });
        }
        let v = self.value(x).mapv(f64::sqrt);
        self.push(Op::Sqrt(x), v)
    }

    pub fn recip(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.value(x).mapv(|e| 1.0 / e);
        self.push(Op::Recip(x), v)
    }

    /// Natural log with inputs clamped at [`LOG_FLOOR`] (zero gradient below it).
    pub fn log(&mut self, x: NodeId) -> Result<NodeId> {
        let floor = LOG_FLOOR;
        let v = self.value(x).mapv(|e| e.max(floor).ln());
        self.push(Op::ClampedLog { x, floor }, v)
    }

    fn clamped_recip(&mut self, x: NodeId, floor: f64) -> Result<NodeId> {
        let v = self.value(x).mapv(|e| if e >= floor { 1.0 / e } else { 0.0 });
        self.push(Op::ClampedRecip { x, floor }, v)
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        self.leaky_relu(x, 0.0)
    }

    pub fn leaky_relu(&mut self, x: NodeId, slope: f64) -> Result<NodeId> {
        let v = self.value(x).mapv(|e| if e > 0.0 { e } else { slope * e });
        self.push(Op::LeakyRelu { x, slope }, v)
    }

    fn leaky_relu_grad(&mut self, g: NodeId, x: NodeId, slope: f64) -> Result<NodeId> {
        let mut v = self.value(g).clone();
        Zip::from(&mut v).and(self.value(x)).for_each(|gv, &xv| {
            if xv <= 0.0 {
                *gv *= slope;
            }
        });
        self.push(Op::LeakyReluGrad { g, x, slope }, v)
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.value(x).mapv(f64::tanh);
        self.push(Op::Tanh(x), v)
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let mut v = self.value(x).clone();
        for mut row in v.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &e| m.max(e));
            row.mapv_inplace(|e| (e - max).exp());
            let sum = row.sum();
            row /= sum;
        }
        self.push(Op::Softmax(x), v)
    }

    /// Row-wise `x - log(sum(exp(x)))`.
    pub fn log_softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let mut v = self.value(x).clone();
        for mut row in v.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &e| m.max(e));
            let lse = max + row.iter().map(|&e| (e - max).exp()).sum::<f64>().ln();
            row.mapv_inplace(|e| e - lse);
        }
        self.push(Op::LogSoftmax(x), v)
    }

    /// `softmax((logits + g) / tau)` per row with `g` i.i.d. standard Gumbel.
    pub fn gumbel_softmax<R: Rng + ?Sized>(&mut self, logits: NodeId, tau: f64, rng: &mut R) -> Result<NodeId> {
        let scaled = self.gumbel_scores(logits, tau, rng)?;
        self.softmax(scaled)
    }

    /// Gumbel-softmax output together with its exact log, computed without
    /// going through a clamped logarithm.
    pub fn gumbel_softmax_with_log<R: Rng + ?Sized>(
        &mut self,
        logits: NodeId,
        tau: f64,
        rng: &mut R,
    ) -> Result<(NodeId, NodeId)> {
        let scaled = self.gumbel_scores(logits, tau, rng)?;
        Ok((self.softmax(scaled)?, self.log_softmax(scaled)?))
    }

    fn gumbel_scores<R: Rng + ?Sized>(&mut self, logits: NodeId, tau: f64, rng: &mut R) -> Result<NodeId> {
        if tau.is_nan() || tau <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "gumbel temperature must be > 0, got {tau}"
            )));
        }
        let (r, c) = self.shape(logits);
        let gumbel = Gumbel::new(0.0, 1.0).expect("unit gumbel");
        let noise = Array2::from_shape_simple_fn((r, c), || gumbel.sample(rng));
        let noise = self.leaf(noise);
        let perturbed = self.add(logits, noise)?;
        self.scale(perturbed, 1.0 / tau)
    }

    /// Column sums as a `1 x n` row.
    pub fn sum_rows(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.value(x).sum_axis(Axis(0)).insert_axis(Axis(0));
        self.push(Op::SumRows(x), v)
    }

    pub fn broadcast_rows(&mut self, x: NodeId, rows: usize) -> Result<NodeId> {
        let (r, n) = self.shape(x);
        if r != 1 {
            return Err(shape_err("broadcast_rows", format!("expected a row, got {r}x{n}")));
        }
        let v = self.value(x).broadcast((rows, n)).expect("row broadcast").to_owned();
        self.push(Op::BroadcastRows { x, rows }, v)
    }

    /// Row sums as an `m x 1` column.
    pub fn sum_cols(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.value(x).sum_axis(Axis(1)).insert_axis(Axis(1));
        self.push(Op::SumCols(x), v)
    }

    pub fn broadcast_cols(&mut self, x: NodeId, cols: usize) -> Result<NodeId> {
        let (m, c) = self.shape(x);
        if c != 1 {
            return Err(shape_err("broadcast_cols", format!("expected a column, got {m}x{c}")));
        }
        let v = self.value(x).broadcast((m, cols)).expect("column broadcast").to_owned();
        self.push(Op::BroadcastCols { x, cols }, v)
    }

    pub fn sum_all(&mut self, x: NodeId) -> Result<NodeId> {
        let v = Array2::from_elem((1, 1), self.value(x).sum());
        self.push(Op::SumAll(x), v)
    }

    pub fn broadcast_scalar(&mut self, x: NodeId, rows: usize, cols: usize) -> Result<NodeId> {
        if self.shape(x) != (1, 1) {
            return Err(shape_err("broadcast_scalar", format!("{:?}", self.shape(x))));
        }
        let v = Array2::from_elem((rows, cols), self.scalar(x));
        self.push(Op::BroadcastScalar { x, rows, cols }, v)
    }

    /// Mean over every element, as a 1x1 node.
    pub fn mean(&mut self, x: NodeId) -> Result<NodeId> {
        let n = self.value(x).len();
        if n == 0 {
            return Err(shape_err("mean", "empty tensor".into()));
        }
        let s = self.sum_all(x)?;
        self.scale(s, 1.0 / n as f64)
    }

    /// Column-wise concatenation.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let Some(&first) = parts.first() else {
            return Err(shape_err("concat", "no inputs".into()));
        };
        let rows = self.shape(first).0;
        if let Some(&bad) = parts.iter().find(|&&p| self.shape(p).0 != rows) {
            return Err(shape_err("concat", format!("{rows} rows vs {:?}", self.shape(bad))));
        }
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = ndarray::concatenate(Axis(1), &views).expect("row counts checked");
        self.push(Op::Concat(parts.to_vec()), v)
    }

    /// Columns `start..start + width`.
    pub fn slice_cols(&mut self, x: NodeId, start: usize, width: usize) -> Result<NodeId> {
        let (_, c) = self.shape(x);
        if start + width > c {
            return Err(shape_err("slice", format!("{start}+{width} > {c}")));
        }
        let v = self.value(x).slice(s![.., start..start + width]).to_owned();
        self.push(Op::Slice { x, start, width }, v)
    }

    fn pad_cols(&mut self, x: NodeId, start: usize, total: usize) -> Result<NodeId> {
        let (r, c) = self.shape(x);
        let mut v = Array2::zeros((r, total));
        v.slice_mut(s![.., start..start + c]).assign(self.value(x));
        self.push(Op::Pad { x, start, total }, v)
    }

    /// Row-major reshape; `rows * cols` must match.
    pub fn reshape(&mut self, x: NodeId, rows: usize, cols: usize) -> Result<NodeId> {
        let (r, c) = self.shape(x);
        if r * c != rows * cols {
            return Err(shape_err("reshape", format!("{r}x{c} -> {rows}x{cols}")));
        }
        let flat: Vec<f64> = self.value(x).iter().copied().collect();
        let v = Array2::from_shape_vec((rows, cols), flat).expect("size checked");
        self.push(Op::Reshape { x, rows, cols }, v)
    }

    /// Inverted dropout: in training mode each element is zeroed with
    /// probability `p` and survivors are scaled by `1 / (1 - p)`. The mask is
    /// a constant of the graph, so every gradient built from this node sees
    /// the same realization.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: NodeId, p: f64, mode: Mode, rng: &mut R) -> Result<NodeId> {
        if mode == Mode::Eval || p == 0.0 {
            return Ok(x);
        }
        let (r, c) = self.shape(x);
        let keep = 1.0 / (1.0 - p);
        let mask = Array2::from_shape_simple_fn((r, c), || if rng.random::<f64>() < p { 0.0 } else { keep });
        let mask = self.leaf(mask);
        self.mul(x, mask)
    }

    /// Batch normalization over rows followed by a per-column affine
    /// (`gamma`, `beta` are `1 x n`).
    pub fn batch_norm(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        mode: BatchNormMode<'_>,
    ) -> Result<(NodeId, Option<BatchStats>)> {
        let (b, n) = self.shape(x);
        if self.shape(gamma) != (1, n) || self.shape(beta) != (1, n) {
            return Err(shape_err(
                "batch_norm",
                format!("x {b}x{n}, gamma {:?}", self.shape(gamma)),
            ));
        }
        let xv = self.value(x);
        let (mean, var_biased, eps, stats) = match mode {
            BatchNormMode::Batch { eps } => {
                if b < 2 {
                    return Err(shape_err("batch_norm", format!("batch of {b} rows")));
                }
                let mean = xv.mean_axis(Axis(0)).expect("non-empty");
                let var = xv.var_axis(Axis(0), 0.0);
                let unbiased = &var * (b as f64 / (b as f64 - 1.0));
                let stats = BatchStats {
                    mean: mean.to_vec(),
                    var: unbiased.to_vec(),
                };
                (mean, var, eps, Some(stats))
            }
            BatchNormMode::Running { mean, var, eps } => {
                if mean.len() != n || var.len() != n {
                    return Err(shape_err(
                        "batch_norm",
                        format!("running stats of width {}", mean.len()),
                    ));
                }
                (
                    ndarray::Array1::from(mean.to_vec()),
                    ndarray::Array1::from(var.to_vec()),
                    eps,
                    None,
                )
            }
        };
        let inv_std = var_biased.mapv(|v| 1.0 / (v + eps).sqrt()).insert_axis(Axis(0));
        let xhat = (xv - &mean.insert_axis(Axis(0))) * &inv_std;
        let out = &xhat * self.value(gamma) + self.value(beta);
        let cache = BnCache {
            xhat,
            inv_std,
            batch_stats: stats.is_some(),
        };
        let id = self.push_with(Op::BatchNorm { x, gamma, beta }, out, Some(cache))?;
        Ok((id, stats))
    }

    /// Mean of `-logp[target]` over rows, for row-wise log-probabilities.
    pub fn nll(&mut self, logp: NodeId, targets: &[usize]) -> Result<NodeId> {
        let (r, c) = self.shape(logp);
        if targets.len() != r {
            return Err(shape_err("nll", format!("{} targets for {r} rows", targets.len())));
        }
        let mut mask = Array2::zeros((r, c));
        for (i, &t) in targets.iter().enumerate() {
            if t >= c {
                return Err(shape_err("nll", format!("target {t} for {c} columns")));
            }
            mask[[i, t]] = 1.0;
        }
        let mask = self.leaf(mask);
        let picked = self.mul(logp, mask)?;
        let total = self.sum_all(picked)?;
        self.scale(total, -1.0 / r as f64)
    }

    /// Mean categorical cross-entropy `-log p[target]` of row-stochastic `probs`.
    pub fn cross_entropy(&mut self, probs: NodeId, targets: &[usize]) -> Result<NodeId> {
        let (r, c) = self.shape(probs);
        if targets.len() != r {
            return Err(shape_err(
                "cross_entropy",
                format!("{} targets for {r} rows", targets.len()),
            ));
        }
        let mut onehot = Array2::zeros((r, c));
        for (i, &t) in targets.iter().enumerate() {
            if t >= c {
                return Err(shape_err("cross_entropy", format!("target {t} >= width {c}")));
            }
            onehot[[i, t]] = 1.0;
        }
        let onehot = self.leaf(onehot);
        let picked = self.mul(probs, onehot)?;
        let picked = self.sum_cols(picked)?;
        let logp = self.log(picked)?;
        let m = self.mean(logp)?;
        self.scale(m, -1.0)
    }

    /// Mean binary cross-entropy of an `m x 1` probability column against 0/1 targets.
    pub fn binary_cross_entropy(&mut self, p: NodeId, targets: &[bool]) -> Result<NodeId> {
        let (r, c) = self.shape(p);
        if c != 1 || targets.len() != r {
            return Err(shape_err(
                "binary_cross_entropy",
                format!("{r}x{c} with {} targets", targets.len()),
            ));
        }
        let t = Array2::from_shape_fn((r, 1), |(i, _)| if targets[i] { 1.0 } else { 0.0 });
        let not_t = t.mapv(|v| 1.0 - v);
        let t = self.leaf(t);
        let not_t = self.leaf(not_t);
        let log_p = self.log(p)?;
        let q = self.affine(p, -1.0, 1.0)?;
        let log_q = self.log(q)?;
        let a = self.mul(log_p, t)?;
        let b = self.mul(log_q, not_t)?;
        let sum = self.add(a, b)?;
        let m = self.mean(sum)?;
        self.scale(m, -1.0)
    }

    /// Per-row Euclidean norm `sqrt(sum x^2 + eps)` as an `m x 1` column.
    pub fn row_norm(&mut self, x: NodeId, eps: f64) -> Result<NodeId> {
        let sq = self.square(x)?;
        let s = self.sum_cols(sq)?;
        let s = self.affine(s, 1.0, eps)?;
        self.sqrt(s)
    }
}
