use ndarray::{Array2, Axis};

use super::{Graph, NodeId, Op};
use crate::error::{Error, Result};

impl Graph {
    /// Gradients of the scalar `root` with respect to each node in `wrt`.
    ///
    /// The gradients are appended to the graph as ordinary nodes, so they can
    /// feed further computation and be differentiated again. Nodes in `wrt`
    /// that `root` does not depend on get a zero gradient.
    pub fn grad(&mut self, root: NodeId, wrt: &[NodeId]) -> Result<Vec<NodeId>> {
        let (rows, cols) = self.shape(root);
        if (rows, cols) != (1, 1) {
            return Err(Error::NotScalarRoot { rows, cols });
        }
        let n = root.0 + 1;
        let needs = self.dependency_mask(n, wrt);
        let mut adjoint: Vec<Option<NodeId>> = vec![None; n];
        if needs[root.0] {
            adjoint[root.0] = Some(self.constant(1, 1, 1.0));
        }
        for i in (0..n).rev() {
            let Some(g) = adjoint[i] else { continue };
            let op = self.nodes[i].op.clone();
            for (input, contrib) in self.vjp(NodeId(i), &op, g, &needs)? {
                adjoint[input.0] = Some(match adjoint[input.0] {
                    None => contrib,
                    Some(prev) => self.add(prev, contrib)?,
                });
            }
        }
        let out = wrt
            .iter()
            .map(|&w| match adjoint.get(w.0).copied().flatten() {
                Some(g) => g,
                None => {
                    let (r, c) = self.shape(w);
                    self.constant(r, c, 0.0)
                }
            })
            .collect();
        Ok(out)
    }

    /// `∇ₓ C` as a differentiable node.
    ///
    /// Fails with [`Error::UnsupportedOpForSecondOrder`] if an operation on a
    /// path from `x` to `c` lacks a differentiable gradient rule.
    pub fn input_gradient_node(&mut self, c: NodeId, x: NodeId) -> Result<NodeId> {
        let n = c.0 + 1;
        let needs = self.dependency_mask(n, &[x]);
        for (i, node) in self.nodes[..n].iter().enumerate() {
            if needs[i] && !second_order_safe(&node.op) {
                return Err(Error::UnsupportedOpForSecondOrder { op: node.op.name() });
            }
        }
        Ok(self.grad(c, &[x])?[0])
    }

    /// `mask[i]` is true when node `i < n` depends on any of `wrt`.
    fn dependency_mask(&self, n: usize, wrt: &[NodeId]) -> Vec<bool> {
        let mut needs = vec![false; n];
        for &w in wrt {
            if w.0 < n {
                needs[w.0] = true;
            }
        }
        for i in 0..n {
            if !needs[i] {
                needs[i] = self.nodes[i].op.inputs().iter().any(|j| needs[j.0]);
            }
        }
        needs
    }

    /// Contributions of the adjoint `g` of node `id` to its inputs.
    fn vjp(&mut self, id: NodeId, op: &Op, g: NodeId, needs: &[bool]) -> Result<Vec<(NodeId, NodeId)>> {
        let need = |x: NodeId| needs[x.0];
        let mut out = Vec::new();
        match *op {
            Op::Leaf => {}
            Op::MatMul { a, b, ta, tb } => {
                if need(a) {
                    let da = match (ta, tb) {
                        (false, false) => self.matmul_t(g, b, false, true)?,
                        (false, true) => self.matmul_t(g, b, false, false)?,
                        (true, false) => self.matmul_t(b, g, false, true)?,
                        (true, true) => self.matmul_t(b, g, true, true)?,
                    };
                    out.push((a, da));
                }
                if need(b) {
                    let db = match (ta, tb) {
                        (false, false) => self.matmul_t(a, g, true, false)?,
                        (false, true) => self.matmul_t(g, a, true, false)?,
                        (true, false) => self.matmul_t(a, g, false, false)?,
                        (true, true) => self.matmul_t(g, a, true, true)?,
                    };
                    out.push((b, db));
                }
            }
            Op::AddRow { x, row } => {
                if need(x) {
                    out.push((x, g));
                }
                if need(row) {
                    out.push((row, self.sum_rows(g)?));
                }
            }
            Op::Add(a, b) => {
                for x in [a, b] {
                    if need(x) {
                        out.push((x, g));
                    }
                }
            }
            Op::Sub(a, b) => {
                if need(a) {
                    out.push((a, g));
                }
                if need(b) {
                    out.push((b, self.scale(g, -1.0)?));
                }
            }
            Op::Mul(a, b) => {
                if need(a) {
                    out.push((a, self.mul(g, b)?));
                }
                if need(b) {
                    out.push((b, self.mul(g, a)?));
                }
            }
            Op::Affine { x, scale, .. } => {
                if need(x) {
                    out.push((x, self.scale(g, scale)?));
                }
            }
            Op::Square(x) => {
                if need(x) {
                    let two_x = self.scale(x, 2.0)?;
                    out.push((x, self.mul(g, two_x)?));
                }
            }
            Op::Sqrt(x) => {
                if need(x) {
                    let r = self.recip(id)?;
                    let half_r = self.scale(r, 0.5)?;
                    out.push((x, self.mul(g, half_r)?));
                }
            }
            Op::Recip(x) | Op::ClampedRecip { x, .. } => {
                if need(x) {
                    let sq = self.square(id)?;
                    let d = self.scale(sq, -1.0)?;
                    out.push((x, self.mul(g, d)?));
                }
            }
            Op::ClampedLog { x, floor } => {
                if need(x) {
                    let r = self.clamped_recip(x, floor)?;
                    out.push((x, self.mul(g, r)?));
                }
            }
            Op::LeakyRelu { x, slope } => {
                if need(x) {
                    out.push((x, self.leaky_relu_grad(g, x, slope)?));
                }
            }
            Op::LeakyReluGrad { g: inner, x, slope } => {
                // piecewise constant in x
                if need(inner) {
                    out.push((inner, self.leaky_relu_grad(g, x, slope)?));
                }
            }
            Op::Tanh(x) => {
                if need(x) {
                    let sq = self.square(id)?;
                    let d = self.affine(sq, -1.0, 1.0)?;
                    out.push((x, self.mul(g, d)?));
                }
            }
            Op::Softmax(x) => {
                if need(x) {
                    let cols = self.shape(x).1;
                    let gy = self.mul(g, id)?;
                    let s = self.sum_cols(gy)?;
                    let s = self.broadcast_cols(s, cols)?;
                    let centered = self.sub(g, s)?;
                    out.push((x, self.mul(id, centered)?));
                }
            }
            Op::LogSoftmax(x) => {
                if need(x) {
                    let cols = self.shape(x).1;
                    let p = self.softmax(x)?;
                    let s = self.sum_cols(g)?;
                    let s = self.broadcast_cols(s, cols)?;
                    let ps = self.mul(p, s)?;
                    out.push((x, self.sub(g, ps)?));
                }
            }
            Op::SumRows(x) => {
                if need(x) {
                    let rows = self.shape(x).0;
                    out.push((x, self.broadcast_rows(g, rows)?));
                }
            }
            Op::BroadcastRows { x, .. } => {
                if need(x) {
                    out.push((x, self.sum_rows(g)?));
                }
            }
            Op::SumCols(x) => {
                if need(x) {
                    let cols = self.shape(x).1;
                    out.push((x, self.broadcast_cols(g, cols)?));
                }
            }
            Op::BroadcastCols { x, .. } => {
                if need(x) {
                    out.push((x, self.sum_cols(g)?));
                }
            }
            Op::SumAll(x) => {
                if need(x) {
                    let (r, c) = self.shape(x);
                    out.push((x, self.broadcast_scalar(g, r, c)?));
                }
            }
            Op::BroadcastScalar { x, .. } => {
                if need(x) {
                    out.push((x, self.sum_all(g)?));
                }
            }
            Op::Concat(ref parts) => {
                let mut offset = 0;
                for &p in parts {
                    let w = self.shape(p).1;
                    if need(p) {
                        out.push((p, self.slice_cols(g, offset, w)?));
                    }
                    offset += w;
                }
            }
            Op::Slice { x, start, .. } => {
                if need(x) {
                    let total = self.shape(x).1;
                    out.push((x, self.pad_cols(g, start, total)?));
                }
            }
            Op::Pad { x, start, .. } => {
                if need(x) {
                    let w = self.shape(x).1;
                    out.push((x, self.slice_cols(g, start, w)?));
                }
            }
            Op::Reshape { x, .. } => {
                if need(x) {
                    let (r, c) = self.shape(x);
                    out.push((x, self.reshape(g, r, c)?));
                }
            }
            Op::BatchNorm { x, gamma, beta } => {
                if need(x) {
                    out.push((x, self.batch_norm_grad_input(id, g)?));
                }
                if need(gamma) {
                    out.push((gamma, self.batch_norm_grad_gamma(id, g)?));
                }
                if need(beta) {
                    out.push((beta, self.sum_rows(g)?));
                }
            }
            Op::BatchNormGradInput { .. } | Op::BatchNormGradGamma { .. } => {
                return Err(Error::UnsupportedOpForSecondOrder { op: op.name() });
            }
        }
        Ok(out)
    }

    fn batch_norm_grad_input(&mut self, bn: NodeId, g: NodeId) -> Result<NodeId> {
        let Op::BatchNorm { gamma, .. } = self.nodes[bn.0].op else {
            unreachable!("batch-norm gradient of a non-batch-norm node")
        };
        let cache = self.nodes[bn.0].bn.as_ref().expect("batch-norm node carries its cache");
        let gv = self.value(g);
        let dxhat = gv * self.value(gamma);
        let v = if cache.batch_stats {
            let b = gv.nrows() as f64;
            let sum_d = dxhat.sum_axis(Axis(0)).insert_axis(Axis(0));
            let sum_dx = (&dxhat * &cache.xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
            let inner = &dxhat * b - &sum_d - &cache.xhat * &sum_dx;
            inner * &cache.inv_std / b
        } else {
            dxhat * &cache.inv_std
        };
        self.push(Op::BatchNormGradInput { bn, g }, v)
    }

    fn batch_norm_grad_gamma(&mut self, bn: NodeId, g: NodeId) -> Result<NodeId> {
        let cache = self.nodes[bn.0].bn.as_ref().expect("batch-norm node carries its cache");
        let v: Array2<f64> = (self.value(g) * &cache.xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
        self.push(Op::BatchNormGradGamma { bn, g }, v)
    }
}

fn second_order_safe(op: &Op) -> bool {
    !matches!(
        op,
        Op::BatchNorm { .. } | Op::BatchNormGradInput { .. } | Op::BatchNormGradGamma { .. }
    )
}
