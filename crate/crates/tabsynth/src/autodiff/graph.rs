//! Dynamically built computation graphs with reverse-mode differentiation.
//!
//! A graph is rebuilt per minibatch: leaves are copied in from a [`ParamSet`]
//! or supplied as inputs, ops evaluate eagerly, and [`Graph::backward`] walks
//! the tape in reverse, finally depositing leaf gradients back into the
//! originating `ParamSet`. Nodes created from non-trainable entries, frozen
//! parameters or plain inputs do not propagate gradients, so mixed graphs
//! (e.g. a generator feeding a frozen discriminator) only pay for the parts
//! that need gradients.

use super::params::ParamSet;
use super::tensor::{matmul, matmul_nt, matmul_tn, Tensor};
use super::{AdError, BN_EPS, BN_UPDATE};

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VarId(usize);

/// Deferred update of batch-normalization running statistics, keyed by the
/// parameter name prefix (`{prefix}.running_mean` / `{prefix}.running_var`).
#[derive(Clone, Debug)]
pub struct BnUpdate {
    pub prefix: String,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

enum Payload {
    Leaf,
    Matmul(VarId, VarId),
    Affine { x: VarId, w: VarId, b: VarId },
    Add(VarId, VarId),
    Sub(VarId, VarId),
    Mul(VarId, VarId),
    ScaleShift { x: VarId, scale: f64 },
    Concat(Vec<VarId>),
    SliceCols { x: VarId, start: usize },
    BroadcastRows { x: VarId },
    Tanh(VarId),
    Sigmoid(VarId),
    Relu(VarId),
    LeakyRelu { x: VarId, slope: f64 },
    Softmax(VarId),
    LogSigmoid(VarId),
    Log(VarId),
    MeanAll(VarId),
    SumAll(VarId),
    MeanRows(VarId),
    BatchNormTrain { x: VarId, gamma: VarId, beta: VarId, mean: Vec<f64>, inv_std: Vec<f64> },
    BatchNormInfer { x: VarId, gamma: VarId, beta: VarId, mean: Vec<f64>, inv_std: Vec<f64> },
}

struct Node {
    value: Tensor,
    grad: Option<Tensor>,
    needs_grad: bool,
    payload: Payload,
}

/// Tape of eagerly evaluated ops supporting a single reverse sweep.
pub struct Graph {
    nodes: Vec<Node>,
    /// (node index, ParamSet entry index) for trainable leaves.
    links: Vec<(usize, usize)>,
    bn_updates: Vec<BnUpdate>,
    check_finite: bool,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new(), links: Vec::new(), bn_updates: Vec::new(), check_finite: false }
    }

    /// Turn on per-op finiteness checking; ops then fail fast with
    /// [`AdError::NonFinite`] instead of propagating NaNs.
    pub fn with_finite_checks(mut self) -> Self {
        self.check_finite = true;
        self
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: &'static str, value: Tensor, needs_grad: bool, payload: Payload) -> Result<VarId, AdError> {
        if self.check_finite && !value.all_finite() {
            return Err(AdError::NonFinite(op));
        }
        self.nodes.push(Node { value, grad: None, needs_grad, payload });
        Ok(VarId(self.nodes.len() - 1))
    }

    fn needs(&self, id: VarId) -> bool {
        self.nodes[id.0].needs_grad
    }

    pub fn value(&self, id: VarId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Gradient of a node after [`Graph::backward`]; `None` if no gradient
    /// flowed there.
    pub fn grad(&self, id: VarId) -> Option<&Tensor> {
        self.nodes[id.0].grad.as_ref()
    }

    /// Updates recorded by train-mode batch normalization, in creation order.
    pub fn take_bn_updates(&mut self) -> Vec<BnUpdate> {
        std::mem::take(&mut self.bn_updates)
    }

    // ---- leaves ---------------------------------------------------------

    /// Leaf copied from a `ParamSet` entry. Trainable entries receive
    /// gradients on `backward`; non-trainable entries enter as constants.
    pub fn param(&mut self, ps: &ParamSet, name: &str) -> Result<VarId, AdError> {
        let idx = ps.index_of(name)?;
        let e = ps.entry(idx);
        let id = self.push("param", e.value.clone(), e.trainable, Payload::Leaf)?;
        if e.trainable {
            self.links.push((id.0, idx));
        }
        Ok(id)
    }

    /// Leaf copied from a `ParamSet` entry that never receives gradients,
    /// regardless of its trainable flag (e.g. the discriminator inside a
    /// generator step).
    pub fn frozen_param(&mut self, ps: &ParamSet, name: &str) -> Result<VarId, AdError> {
        let idx = ps.index_of(name)?;
        self.push("frozen_param", ps.entry(idx).value.clone(), false, Payload::Leaf)
    }

    /// Constant input leaf.
    pub fn input(&mut self, t: Tensor) -> Result<VarId, AdError> {
        self.push("input", t, false, Payload::Leaf)
    }

    /// Input leaf that receives a gradient, readable via [`Graph::grad`].
    pub fn input_with_grad(&mut self, t: Tensor) -> Result<VarId, AdError> {
        self.push("input", t, true, Payload::Leaf)
    }

    /// 1x1 constant.
    pub fn scalar(&mut self, v: f64) -> Result<VarId, AdError> {
        self.input(Tensor::scalar(v))
    }

    // ---- ops ------------------------------------------------------------

    pub fn matmul(&mut self, a: VarId, b: VarId) -> Result<VarId, AdError> {
        let v = matmul(self.value(a), self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        self.push("matmul", v, ng, Payload::Matmul(a, b))
    }

    /// `x @ w + b` with `b` broadcast over rows.
    pub fn affine(&mut self, x: VarId, w: VarId, b: VarId) -> Result<VarId, AdError> {
        let bv = self.value(b);
        let wv = self.value(w);
        if bv.shape() != (1, wv.cols()) {
            return Err(AdError::ShapeMismatch { op: "affine", lhs: wv.shape(), rhs: bv.shape() });
        }
        let mut v = matmul(self.value(x), wv)?;
        for r in 0..v.rows() {
            let row = v.row_slice_mut(r);
            for (o, &bi) in row.iter_mut().zip(bv.data()) {
                *o += bi;
            }
        }
        let ng = self.needs(x) || self.needs(w) || self.needs(b);
        self.push("affine", v, ng, Payload::Affine { x, w, b })
    }

    fn elementwise_shape(&self, op: &'static str, a: VarId, b: VarId) -> Result<(), AdError> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(AdError::ShapeMismatch {
                op,
                lhs: self.value(a).shape(),
                rhs: self.value(b).shape(),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: VarId, b: VarId) -> Result<VarId, AdError> {
        self.elementwise_shape("add", a, b)?;
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        let ng = self.needs(a) || self.needs(b);
        self.push("add", v, ng, Payload::Add(a, b))
    }

    pub fn sub(&mut self, a: VarId, b: VarId) -> Result<VarId, AdError> {
        self.elementwise_shape("sub", a, b)?;
        let av = self.value(a).data();
        let bv = self.value(b).data();
        let data: Vec<f64> = av.iter().zip(bv).map(|(x, y)| x - y).collect();
        let (r, c) = self.value(a).shape();
        let ng = self.needs(a) || self.needs(b);
        self.push("sub", Tensor::from_vec(r, c, data)?, ng, Payload::Sub(a, b))
    }

    pub fn mul(&mut self, a: VarId, b: VarId) -> Result<VarId, AdError> {
        self.elementwise_shape("mul", a, b)?;
        let av = self.value(a).data();
        let bv = self.value(b).data();
        let data: Vec<f64> = av.iter().zip(bv).map(|(x, y)| x * y).collect();
        let (r, c) = self.value(a).shape();
        let ng = self.needs(a) || self.needs(b);
        self.push("mul", Tensor::from_vec(r, c, data)?, ng, Payload::Mul(a, b))
    }

    /// `scale * x + shift` elementwise.
    pub fn scale_shift(&mut self, x: VarId, scale: f64, shift: f64) -> Result<VarId, AdError> {
        let v = self.value(x).map(|t| scale * t + shift);
        let ng = self.needs(x);
        self.push("scale_shift", v, ng, Payload::ScaleShift { x, scale })
    }

    pub fn neg(&mut self, x: VarId) -> Result<VarId, AdError> {
        self.scale_shift(x, -1.0, 0.0)
    }

    /// Concatenate along columns; all inputs must share a row count.
    pub fn concat(&mut self, xs: &[VarId]) -> Result<VarId, AdError> {
        if xs.is_empty() {
            return Err(AdError::ShapeMismatch { op: "concat", lhs: (0, 0), rhs: (0, 0) });
        }
        let rows = self.value(xs[0]).rows();
        let mut cols = 0;
        for &x in xs {
            if self.value(x).rows() != rows {
                return Err(AdError::ShapeMismatch {
                    op: "concat",
                    lhs: (rows, 0),
                    rhs: self.value(x).shape(),
                });
            }
            cols += self.value(x).cols();
        }
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let orow = out.row_slice_mut(r);
            let mut at = 0;
            for &x in xs {
                let part = self.value(x).row_slice(r);
                orow[at..at + part.len()].copy_from_slice(part);
                at += part.len();
            }
        }
        let ng = xs.iter().any(|&x| self.needs(x));
        self.push("concat", out, ng, Payload::Concat(xs.to_vec()))
    }

    /// Columns `[start, start + width)` of `x`.
    pub fn slice_cols(&mut self, x: VarId, start: usize, width: usize) -> Result<VarId, AdError> {
        let xv = self.value(x);
        if start + width > xv.cols() {
            return Err(AdError::ShapeMismatch {
                op: "slice_cols",
                lhs: xv.shape(),
                rhs: (start, width),
            });
        }
        let mut out = Tensor::zeros(xv.rows(), width);
        for r in 0..xv.rows() {
            out.row_slice_mut(r).copy_from_slice(&xv.row_slice(r)[start..start + width]);
        }
        let ng = self.needs(x);
        self.push("slice_cols", out, ng, Payload::SliceCols { x, start })
    }

    /// Repeat a `1 x k` row `rows` times.
    pub fn broadcast_rows(&mut self, x: VarId, rows: usize) -> Result<VarId, AdError> {
        let xv = self.value(x);
        if xv.rows() != 1 {
            return Err(AdError::ShapeMismatch { op: "broadcast_rows", lhs: xv.shape(), rhs: (1, 0) });
        }
        let mut out = Tensor::zeros(rows, xv.cols());
        for r in 0..rows {
            out.row_slice_mut(r).copy_from_slice(xv.row_slice(0));
        }
        let ng = self.needs(x);
        self.push("broadcast_rows", out, ng, Payload::BroadcastRows { x })
    }

    pub fn tanh(&mut self, x: VarId) -> Result<VarId, AdError> {
        let v = self.value(x).map(f64::tanh);
        let ng = self.needs(x);
        self.push("tanh", v, ng, Payload::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: VarId) -> Result<VarId, AdError> {
        let v = self.value(x).map(stable_sigmoid);
        let ng = self.needs(x);
        self.push("sigmoid", v, ng, Payload::Sigmoid(x))
    }

    pub fn relu(&mut self, x: VarId) -> Result<VarId, AdError> {
        let v = self.value(x).map(|t| if t > 0.0 { t } else { 0.0 });
        let ng = self.needs(x);
        self.push("relu", v, ng, Payload::Relu(x))
    }

    pub fn leaky_relu(&mut self, x: VarId, slope: f64) -> Result<VarId, AdError> {
        let v = self.value(x).map(|t| if t > 0.0 { t } else { slope * t });
        let ng = self.needs(x);
        self.push("leaky_relu", v, ng, Payload::LeakyRelu { x, slope })
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, x: VarId) -> Result<VarId, AdError> {
        let xv = self.value(x);
        let mut out = Tensor::zeros(xv.rows(), xv.cols());
        for r in 0..xv.rows() {
            let row = xv.row_slice(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let orow = out.row_slice_mut(r);
            let mut total = 0.0;
            for (o, &v) in orow.iter_mut().zip(row) {
                *o = (v - max).exp();
                total += *o;
            }
            for o in orow.iter_mut() {
                *o /= total;
            }
        }
        let ng = self.needs(x);
        self.push("softmax", out, ng, Payload::Softmax(x))
    }

    /// `log(sigmoid(x))`, computed without overflow at either tail.
    pub fn log_sigmoid(&mut self, x: VarId) -> Result<VarId, AdError> {
        let v = self.value(x).map(stable_log_sigmoid);
        let ng = self.needs(x);
        self.push("log_sigmoid", v, ng, Payload::LogSigmoid(x))
    }

    pub fn log(&mut self, x: VarId) -> Result<VarId, AdError> {
        let v = self.value(x).map(f64::ln);
        let ng = self.needs(x);
        self.push("log", v, ng, Payload::Log(x))
    }

    /// Mean of all entries, as `1 x 1`.
    pub fn mean_all(&mut self, x: VarId) -> Result<VarId, AdError> {
        let xv = self.value(x);
        let mean = xv.data().iter().sum::<f64>() / xv.len() as f64;
        let ng = self.needs(x);
        self.push("mean_all", Tensor::scalar(mean), ng, Payload::MeanAll(x))
    }

    /// Sum of all entries, as `1 x 1`.
    pub fn sum_all(&mut self, x: VarId) -> Result<VarId, AdError> {
        let s = self.value(x).data().iter().sum::<f64>();
        let ng = self.needs(x);
        self.push("sum_all", Tensor::scalar(s), ng, Payload::SumAll(x))
    }

    /// Column means: `m x k` to `1 x k`.
    pub fn mean_rows(&mut self, x: VarId) -> Result<VarId, AdError> {
        let xv = self.value(x);
        let mut v = xv.col_sum();
        v.scale(1.0 / xv.rows() as f64);
        let ng = self.needs(x);
        self.push("mean_rows", v, ng, Payload::MeanRows(x))
    }

    /// Train-mode batch normalization over rows with learnable scale/offset.
    ///
    /// Normalizes with the biased batch variance and records a deferred
    /// running-statistics update under `prefix` (see [`apply_bn_updates`]).
    pub fn batchnorm_train(
        &mut self,
        x: VarId,
        gamma: VarId,
        beta: VarId,
        prefix: &str,
    ) -> Result<VarId, AdError> {
        let (mean, var) = batch_stats(self.value(x));
        let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let v = bn_forward(self.value(x), self.value(gamma), self.value(beta), &mean, &inv_std)?;
        self.bn_updates.push(BnUpdate { prefix: prefix.to_string(), mean: mean.clone(), var });
        let ng = self.needs(x) || self.needs(gamma) || self.needs(beta);
        self.push("batchnorm", v, ng, Payload::BatchNormTrain { x, gamma, beta, mean, inv_std })
    }

    /// Inference-mode batch normalization using fixed running statistics.
    pub fn batchnorm_infer(
        &mut self,
        x: VarId,
        gamma: VarId,
        beta: VarId,
        running_mean: &Tensor,
        running_var: &Tensor,
    ) -> Result<VarId, AdError> {
        let mean = running_mean.data().to_vec();
        let inv_std: Vec<f64> =
            running_var.data().iter().map(|&v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let v = bn_forward(self.value(x), self.value(gamma), self.value(beta), &mean, &inv_std)?;
        let ng = self.needs(x) || self.needs(gamma) || self.needs(beta);
        self.push("batchnorm", v, ng, Payload::BatchNormInfer { x, gamma, beta, mean, inv_std })
    }

    // ---- backward -------------------------------------------------------

    /// Reverse sweep from a scalar `loss`. Node gradients are recomputed from
    /// scratch, then gradients of trainable leaves are added into `params`;
    /// calling `backward` repeatedly therefore accumulates into `params`
    /// until [`ParamSet::zero_grads`].
    pub fn backward(&mut self, loss: VarId, params: &mut ParamSet) -> Result<(), AdError> {
        if self.value(loss).shape() != (1, 1) {
            return Err(AdError::NotScalar { shape: self.value(loss).shape() });
        }
        for n in &mut self.nodes {
            n.grad = None;
        }
        seed_grad(&mut self.nodes[loss.0]);

        for i in (0..=loss.0).rev() {
            let (before, rest) = self.nodes.split_at_mut(i);
            let node = &mut rest[0];
            let Some(gy) = node.grad.take() else { continue };
            if node.needs_grad {
                propagate(&node.value, &node.payload, &gy, before);
            }
            node.grad = Some(gy);
        }

        for &(node_idx, entry_idx) in &self.links {
            if let Some(g) = &self.nodes[node_idx].grad {
                params.accumulate_grad(entry_idx, g);
            }
        }
        Ok(())
    }
}

fn seed_grad(node: &mut Node) {
    let mut g = Tensor::zeros(1, 1);
    g.data_mut()[0] = 1.0;
    node.grad = Some(g);
}

fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn stable_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Per-column mean and biased variance.
fn batch_stats(x: &Tensor) -> (Vec<f64>, Vec<f64>) {
    let (m, k) = x.shape();
    let mut mean = vec![0.0; k];
    for r in 0..m {
        for (s, &v) in mean.iter_mut().zip(x.row_slice(r)) {
            *s += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= m as f64);
    let mut var = vec![0.0; k];
    for r in 0..m {
        for ((s, &v), &mu) in var.iter_mut().zip(x.row_slice(r)).zip(&mean) {
            let d = v - mu;
            *s += d * d;
        }
    }
    var.iter_mut().for_each(|v| *v /= m as f64);
    (mean, var)
}

fn bn_forward(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    mean: &[f64],
    inv_std: &[f64],
) -> Result<Tensor, AdError> {
    let (m, k) = x.shape();
    if gamma.shape() != (1, k) || beta.shape() != (1, k) {
        return Err(AdError::ShapeMismatch { op: "batchnorm", lhs: x.shape(), rhs: gamma.shape() });
    }
    let g = gamma.data();
    let b = beta.data();
    let mut out = Tensor::zeros(m, k);
    for r in 0..m {
        let xr = x.row_slice(r);
        let or = out.row_slice_mut(r);
        for j in 0..k {
            or[j] = g[j] * (xr[j] - mean[j]) * inv_std[j] + b[j];
        }
    }
    Ok(out)
}

fn accumulate(slot: &mut Option<Tensor>, rows: usize, cols: usize, write: impl FnOnce(&mut Tensor)) {
    let g = slot.get_or_insert_with(|| Tensor::zeros(rows, cols));
    write(g);
}

/// Push the output gradient `gy` of one node into its inputs (all of which
/// live strictly earlier on the tape).
fn propagate(value: &Tensor, payload: &Payload, gy: &Tensor, before: &mut [Node]) {
    match payload {
        Payload::Leaf => {}
        Payload::Matmul(a, b) => {
            if before[a.0].needs_grad {
                let da = matmul_nt(gy, &before[b.0].value).expect("shapes checked at construction");
                let (r, c) = before[a.0].value.shape();
                accumulate(&mut before[a.0].grad, r, c, |g| g.add_assign(&da));
            }
            if before[b.0].needs_grad {
                let db = matmul_tn(&before[a.0].value, gy).expect("shapes checked at construction");
                let (r, c) = before[b.0].value.shape();
                accumulate(&mut before[b.0].grad, r, c, |g| g.add_assign(&db));
            }
        }
        Payload::Affine { x, w, b } => {
            if before[x.0].needs_grad {
                let dx = matmul_nt(gy, &before[w.0].value).expect("shapes checked at construction");
                let (r, c) = before[x.0].value.shape();
                accumulate(&mut before[x.0].grad, r, c, |g| g.add_assign(&dx));
            }
            if before[w.0].needs_grad {
                let dw = matmul_tn(&before[x.0].value, gy).expect("shapes checked at construction");
                let (r, c) = before[w.0].value.shape();
                accumulate(&mut before[w.0].grad, r, c, |g| g.add_assign(&dw));
            }
            if before[b.0].needs_grad {
                let db = gy.col_sum();
                accumulate(&mut before[b.0].grad, 1, db.cols(), |g| g.add_assign(&db));
            }
        }
        Payload::Add(a, b) => {
            for &inp in &[a, b] {
                if before[inp.0].needs_grad {
                    let (r, c) = before[inp.0].value.shape();
                    accumulate(&mut before[inp.0].grad, r, c, |g| g.add_assign(gy));
                }
            }
        }
        Payload::Sub(a, b) => {
            if before[a.0].needs_grad {
                let (r, c) = before[a.0].value.shape();
                accumulate(&mut before[a.0].grad, r, c, |g| g.add_assign(gy));
            }
            if before[b.0].needs_grad {
                let (r, c) = before[b.0].value.shape();
                accumulate(&mut before[b.0].grad, r, c, |g| {
                    for (gd, &gyv) in g.data_mut().iter_mut().zip(gy.data()) {
                        *gd -= gyv;
                    }
                });
            }
        }
        Payload::Mul(a, b) => {
            if before[a.0].needs_grad {
                let bv = before[b.0].value.clone();
                let (r, c) = before[a.0].value.shape();
                accumulate(&mut before[a.0].grad, r, c, |g| {
                    for ((gd, &gyv), &bvv) in g.data_mut().iter_mut().zip(gy.data()).zip(bv.data()) {
                        *gd += gyv * bvv;
                    }
                });
            }
            if before[b.0].needs_grad {
                let av = before[a.0].value.clone();
                let (r, c) = before[b.0].value.shape();
                accumulate(&mut before[b.0].grad, r, c, |g| {
                    for ((gd, &gyv), &avv) in g.data_mut().iter_mut().zip(gy.data()).zip(av.data()) {
                        *gd += gyv * avv;
                    }
                });
            }
        }
        Payload::ScaleShift { x, scale } => {
            if before[x.0].needs_grad {
                let (r, c) = before[x.0].value.shape();
                accumulate(&mut before[x.0].grad, r, c, |g| {
                    for (gd, &gyv) in g.data_mut().iter_mut().zip(gy.data()) {
                        *gd += scale * gyv;
                    }
                });
            }
        }
        Payload::Concat(xs) => {
            let mut at = 0;
            for &x in xs {
                let (r, c) = before[x.0].value.shape();
                if before[x.0].needs_grad {
                    accumulate(&mut before[x.0].grad, r, c, |g| {
                        for row in 0..r {
                            let src = &gy.row_slice(row)[at..at + c];
                            for (gd, &s) in g.row_slice_mut(row).iter_mut().zip(src) {
                                *gd += s;
                            }
                        }
                    });
                }
                at += c;
            }
        }
        Payload::SliceCols { x, start } => {
            if before[x.0].needs_grad {
                let (r, c) = before[x.0].value.shape();
                let w = gy.cols();
                accumulate(&mut before[x.0].grad, r, c, |g| {
                    for row in 0..r {
                        let dst = &mut g.row_slice_mut(row)[*start..*start + w];
                        for (gd, &s) in dst.iter_mut().zip(gy.row_slice(row)) {
                            *gd += s;
                        }
                    }
                });
            }
        }
        Payload::BroadcastRows { x } => {
            if before[x.0].needs_grad {
                let c = before[x.0].value.cols();
                let sums = gy.col_sum();
                accumulate(&mut before[x.0].grad, 1, c, |g| g.add_assign(&sums));
            }
        }
        Payload::Tanh(x) => unary(before, *x, gy, |_, y, gyv| gyv * (1.0 - y * y), value),
        Payload::Sigmoid(x) => unary(before, *x, gy, |_, y, gyv| gyv * y * (1.0 - y), value),
        Payload::Relu(x) => {
            unary(before, *x, gy, |xv, _, gyv| if xv > 0.0 { gyv } else { 0.0 }, value)
        }
        Payload::LeakyRelu { x, slope } => {
            let s = *slope;
            unary(before, *x, gy, move |xv, _, gyv| if xv > 0.0 { gyv } else { s * gyv }, value)
        }
        Payload::LogSigmoid(x) => {
            unary(before, *x, gy, |xv, _, gyv| gyv * (1.0 - stable_sigmoid(xv)), value)
        }
        Payload::Log(x) => unary(before, *x, gy, |xv, _, gyv| gyv / xv, value),
        Payload::Softmax(x) => {
            if before[x.0].needs_grad {
                let (r, c) = before[x.0].value.shape();
                accumulate(&mut before[x.0].grad, r, c, |g| {
                    for row in 0..r {
                        let y = value.row_slice(row);
                        let gyr = gy.row_slice(row);
                        let dot: f64 = y.iter().zip(gyr).map(|(&a, &b)| a * b).sum();
                        for ((gd, &yv), &gyv) in
                            g.row_slice_mut(row).iter_mut().zip(y).zip(gyr)
                        {
                            *gd += yv * (gyv - dot);
                        }
                    }
                });
            }
        }
        Payload::MeanAll(x) => {
            if before[x.0].needs_grad {
                let (r, c) = before[x.0].value.shape();
                let s = gy.item() / (r * c) as f64;
                accumulate(&mut before[x.0].grad, r, c, |g| {
                    g.data_mut().iter_mut().for_each(|v| *v += s);
                });
            }
        }
        Payload::SumAll(x) => {
            if before[x.0].needs_grad {
                let (r, c) = before[x.0].value.shape();
                let s = gy.item();
                accumulate(&mut before[x.0].grad, r, c, |g| {
                    g.data_mut().iter_mut().for_each(|v| *v += s);
                });
            }
        }
        Payload::MeanRows(x) => {
            if before[x.0].needs_grad {
                let (r, c) = before[x.0].value.shape();
                let inv = 1.0 / r as f64;
                accumulate(&mut before[x.0].grad, r, c, |g| {
                    for row in 0..r {
                        for (gd, &gyv) in g.row_slice_mut(row).iter_mut().zip(gy.row_slice(0)) {
                            *gd += gyv * inv;
                        }
                    }
                });
            }
        }
        Payload::BatchNormTrain { x, gamma, beta, mean, inv_std } => {
            bn_backward(before, *x, *gamma, *beta, mean, inv_std, gy, true);
        }
        Payload::BatchNormInfer { x, gamma, beta, mean, inv_std } => {
            bn_backward(before, *x, *gamma, *beta, mean, inv_std, gy, false);
        }
    }
}

/// Elementwise backward helper: `df(x, y, gy)` per entry.
fn unary(
    before: &mut [Node],
    x: VarId,
    gy: &Tensor,
    df: impl Fn(f64, f64, f64) -> f64,
    y: &Tensor,
) {
    if !before[x.0].needs_grad {
        return;
    }
    let xv = before[x.0].value.clone();
    let (r, c) = xv.shape();
    accumulate(&mut before[x.0].grad, r, c, |g| {
        for i in 0..g.data().len() {
            let add = df(xv.data()[i], y.data()[i], gy.data()[i]);
            g.data_mut()[i] += add;
        }
    });
}

#[allow(clippy::too_many_arguments)]
fn bn_backward(
    before: &mut [Node],
    x: VarId,
    gamma: VarId,
    beta: VarId,
    mean: &[f64],
    inv_std: &[f64],
    gy: &Tensor,
    train_stats: bool,
) {
    let xv = before[x.0].value.clone();
    let gv = before[gamma.0].value.clone();
    let (m, k) = xv.shape();

    // xhat, per-column sums of gy and gy * xhat.
    let mut sum_gy = vec![0.0; k];
    let mut sum_gy_xhat = vec![0.0; k];
    let mut xhat = Tensor::zeros(m, k);
    for r in 0..m {
        let xr = xv.row_slice(r);
        let gr = gy.row_slice(r);
        let hr = xhat.row_slice_mut(r);
        for j in 0..k {
            let h = (xr[j] - mean[j]) * inv_std[j];
            hr[j] = h;
            sum_gy[j] += gr[j];
            sum_gy_xhat[j] += gr[j] * h;
        }
    }

    if before[beta.0].needs_grad {
        accumulate(&mut before[beta.0].grad, 1, k, |g| {
            for (gd, &s) in g.data_mut().iter_mut().zip(&sum_gy) {
                *gd += s;
            }
        });
    }
    if before[gamma.0].needs_grad {
        accumulate(&mut before[gamma.0].grad, 1, k, |g| {
            for (gd, &s) in g.data_mut().iter_mut().zip(&sum_gy_xhat) {
                *gd += s;
            }
        });
    }
    if before[x.0].needs_grad {
        accumulate(&mut before[x.0].grad, m, k, |g| {
            for r in 0..m {
                let gr = gy.row_slice(r);
                let hr = xhat.row_slice(r);
                let gd = g.row_slice_mut(r);
                for j in 0..k {
                    let d = if train_stats {
                        // Batch statistics depend on x.
                        gv.data()[j] * inv_std[j] / m as f64
                            * (m as f64 * gr[j] - sum_gy[j] - hr[j] * sum_gy_xhat[j])
                    } else {
                        gv.data()[j] * inv_std[j] * gr[j]
                    };
                    gd[j] += d;
                }
            }
        });
    }
}

/// Fold deferred batch-normalization updates into running statistics:
/// `running = (1 - BN_UPDATE) * running + BN_UPDATE * batch`.
pub fn apply_bn_updates(params: &mut ParamSet, updates: &[BnUpdate]) -> Result<(), AdError> {
    for u in updates {
        for (suffix, batch) in [("running_mean", &u.mean), ("running_var", &u.var)] {
            let name = format!("{}.{}", u.prefix, suffix);
            let t = params.get_mut(&name)?;
            for (r, &b) in t.data_mut().iter_mut().zip(batch) {
                *r = (1.0 - BN_UPDATE) * *r + BN_UPDATE * b;
            }
        }
    }
    Ok(())
}
