//! Reverse-mode differentiation over per-example computation graphs.
//!
//! Tree-shaped models rebuild their graph for every example, so the tape is a
//! throwaway: record eagerly during the forward pass, walk the node list in
//! reverse for gradients, drop it. Trainable tensors live outside the tape in
//! a [`ParamStore`]; `backward` adds into their `grad` accumulators, which lets
//! a caller accumulate gradients over a batch of graphs before one optimizer
//! step. Gradients are reset explicitly via [`ParamStore::reset_grads`].
//!
//! Forward passes over a shared `&ParamStore` may run in parallel; `backward`
//! takes `&mut ParamStore`, so gradient accumulation is serialized by the
//! borrow checker.

use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

// ── Parameters ───────────────────────────────────────────────────────

/// A trainable tensor with its gradient and Adagrad accumulator.
///
/// Invariant: `grad` and `accum` always have the value's shape; `accum` is
/// elementwise nondecreasing across optimizer steps.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Parameter {
    pub value: Tensor,
    pub grad: Tensor,
    pub accum: Tensor,
}

impl Parameter {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros_like(&value);
        let accum = Tensor::zeros_like(&value);
        Parameter { value, grad, accum }
    }
}

/// Handle into a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

/// Named collection of all trainable parameters of a model.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ParamStore {
    names: Vec<String>,
    params: Vec<Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    /// Register a parameter under a unique name. Registration order fixes the
    /// id and the (deterministic) iteration order.
    pub fn register(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        debug_assert!(
            !self.names.contains(&name),
            "duplicate parameter name {name}"
        );
        let id = ParamId(self.params.len());
        self.names.push(name);
        self.params.push(Parameter::new(value));
        id
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn param(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn param_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Parameter)> {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.params.iter())
    }

    pub fn reset_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// Total number of scalar parameter elements.
    pub fn element_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}

// ── Errors ───────────────────────────────────────────────────────────

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AutodiffError {
    #[error("{op}: operand shapes {left:?} and {right:?} do not agree")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("{op}: expected {expected}, got shape {got:?}")]
    BadShape {
        op: &'static str,
        expected: &'static str,
        got: Vec<usize>,
    },
    #[error("{op}: index {index} out of range for size {size}")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        size: usize,
    },
    #[error("kl divergence undefined: q[{index}] = 0 where p[{index}] > 0")]
    KlZeroSupport { index: usize },
}

type Result<T> = std::result::Result<T, AutodiffError>;

// ── Scalar kernels (shared by forward and backward) ─────────────────

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax with max-subtraction; output sums to 1 within roundoff.
pub fn softmax_slice(v: &[f64]) -> Vec<f64> {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|e| e / z).collect()
}

/// KL(p ‖ q) = Σ p_i (ln p_i − ln q_i), skipping p_i = 0 terms.
///
/// Errors when q has a zero where p has mass; softmax output always has full
/// support, so in-model calls never hit this.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(AutodiffError::ShapeMismatch {
            op: "kl_divergence",
            left: vec![p.len()],
            right: vec![q.len()],
        });
    }
    let mut acc = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q.iter()).enumerate() {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Err(AutodiffError::KlZeroSupport { index: i });
            }
            acc += pi * (pi.ln() - qi.ln());
        }
    }
    Ok(acc)
}

// ── Tape ─────────────────────────────────────────────────────────────

/// Index of a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatVec { w: NodeId, x: NodeId },
    AddN(Vec<NodeId>),
    Hadamard { a: NodeId, b: NodeId },
    Sigmoid(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    AbsDiff { a: NodeId, b: NodeId },
    Scale { x: NodeId, k: f64 },
    Softmax(NodeId),
    Dot { a: NodeId, b: NodeId },
    SumSq(NodeId),
    KlDiv { target: Tensor, q: NodeId },
    NllPick { probs: NodeId, class: usize },
    ColumnPick { w: NodeId, col: usize },
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Recorded forward pass. Operations evaluate eagerly; `backward` replays the
/// node list in exact reverse order, so gradients are deterministic: two runs
/// on identical inputs produce bitwise-identical grads.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    // One leaf per parameter per tape; cells reuse the same weights at every
    // tree node, so this keeps graphs small.
    param_leaves: HashMap<ParamId, NodeId>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
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

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, value });
        id
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Constant, value)
    }

    /// Leaf for a trainable parameter; the value is snapshotted from the
    /// store at record time.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        if let Some(&node) = self.param_leaves.get(&id) {
            return node;
        }
        let node = self.push(Op::Param(id), store.value(id).clone());
        self.param_leaves.insert(id, node);
        node
    }

    /// `W x` for `W: [m, n]`, `x: [n]`.
    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> Result<NodeId> {
        let (wv, xv) = (self.value(w), self.value(x));
        if wv.shape().len() != 2 {
            return Err(AutodiffError::BadShape {
                op: "matvec",
                expected: "a matrix on the left",
                got: wv.shape().to_vec(),
            });
        }
        if xv.shape().len() != 1 || wv.cols() != xv.len() {
            return Err(AutodiffError::ShapeMismatch {
                op: "matvec",
                left: wv.shape().to_vec(),
                right: xv.shape().to_vec(),
            });
        }
        let (m, n) = (wv.rows(), wv.cols());
        let mut out = vec![0.0; m];
        let wd = wv.data();
        let xd = xv.data();
        for i in 0..m {
            let row = &wd[i * n..(i + 1) * n];
            out[i] = row.iter().zip(xd).map(|(a, b)| a * b).sum();
        }
        Ok(self.push(Op::MatVec { w, x }, Tensor::vector(out)))
    }

    /// Elementwise sum of two or more same-shape tensors, in argument order.
    pub fn add_n(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        assert!(!xs.is_empty(), "add_n needs at least one operand");
        let shape = self.value(xs[0]).shape().to_vec();
        for &x in &xs[1..] {
            if self.value(x).shape() != shape.as_slice() {
                return Err(AutodiffError::ShapeMismatch {
                    op: "add",
                    left: shape,
                    right: self.value(x).shape().to_vec(),
                });
            }
        }
        let mut out = self.value(xs[0]).data().to_vec();
        for &x in &xs[1..] {
            for (o, v) in out.iter_mut().zip(self.value(x).data()) {
                *o += v;
            }
        }
        let value = Tensor::new(shape, out).expect("add_n shape");
        Ok(self.push(Op::AddN(xs.to_vec()), value))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.add_n(&[a, b])
    }

    fn binary_same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(AutodiffError::ShapeMismatch {
                op,
                left: self.value(a).shape().to_vec(),
                right: self.value(b).shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Pointwise product.
    pub fn hadamard(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape("hadamard", a, b)?;
        let out: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let value = Tensor::new(self.value(a).shape().to_vec(), out).expect("hadamard shape");
        Ok(self.push(Op::Hadamard { a, b }, value))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let out: Vec<f64> = self.value(x).data().iter().map(|&v| sigmoid(v)).collect();
        let value = Tensor::new(self.value(x).shape().to_vec(), out).expect("sigmoid shape");
        self.push(Op::Sigmoid(x), value)
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let out: Vec<f64> = self.value(x).data().iter().map(|v| v.tanh()).collect();
        let value = Tensor::new(self.value(x).shape().to_vec(), out).expect("tanh shape");
        self.push(Op::Tanh(x), value)
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let out: Vec<f64> = self.value(x).data().iter().map(|v| v.max(0.0)).collect();
        let value = Tensor::new(self.value(x).shape().to_vec(), out).expect("relu shape");
        self.push(Op::Relu(x), value)
    }

    /// `|a − b|` elementwise; subgradient 0 where a = b.
    pub fn abs_diff(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape("abs_diff", a, b)?;
        let out: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| (x - y).abs())
            .collect();
        let value = Tensor::new(self.value(a).shape().to_vec(), out).expect("abs_diff shape");
        Ok(self.push(Op::AbsDiff { a, b }, value))
    }

    pub fn scale(&mut self, x: NodeId, k: f64) -> NodeId {
        let out: Vec<f64> = self.value(x).data().iter().map(|v| v * k).collect();
        let value = Tensor::new(self.value(x).shape().to_vec(), out).expect("scale shape");
        self.push(Op::Scale { x, k }, value)
    }

    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.shape().len() != 1 {
            return Err(AutodiffError::BadShape {
                op: "softmax",
                expected: "a vector",
                got: xv.shape().to_vec(),
            });
        }
        let value = Tensor::vector(softmax_slice(xv.data()));
        Ok(self.push(Op::Softmax(x), value))
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape("dot", a, b)?;
        let v: f64 = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .sum();
        Ok(self.push(Op::Dot { a, b }, Tensor::scalar(v)))
    }

    /// Σ x_i², as a scalar node. Used for the L2 penalty.
    pub fn sum_sq(&mut self, x: NodeId) -> NodeId {
        let v: f64 = self.value(x).data().iter().map(|v| v * v).sum();
        self.push(Op::SumSq(x), Tensor::scalar(v))
    }

    /// KL(target ‖ q) as a scalar node. The target is a fixed distribution;
    /// gradient flows only into `q`.
    pub fn kl_div(&mut self, target: &Tensor, q: NodeId) -> Result<NodeId> {
        if target.shape() != self.value(q).shape() {
            return Err(AutodiffError::ShapeMismatch {
                op: "kl_div",
                left: target.shape().to_vec(),
                right: self.value(q).shape().to_vec(),
            });
        }
        let v = kl_divergence(target.data(), self.value(q).data())?;
        Ok(self.push(
            Op::KlDiv {
                target: target.clone(),
                q,
            },
            Tensor::scalar(v),
        ))
    }

    /// `−ln probs[class]`, as a scalar node.
    pub fn nll_pick(&mut self, probs: NodeId, class: usize) -> Result<NodeId> {
        let pv = self.value(probs);
        if class >= pv.len() {
            return Err(AutodiffError::IndexOutOfRange {
                op: "nll_pick",
                index: class,
                size: pv.len(),
            });
        }
        let v = -pv.data()[class].ln();
        Ok(self.push(Op::NllPick { probs, class }, Tensor::scalar(v)))
    }

    /// Column `col` of a matrix node, as a vector. The sparse path for one-hot
    /// products: never materializes a dense matvec.
    pub fn column(&mut self, w: NodeId, col: usize) -> Result<NodeId> {
        let wv = self.value(w);
        if wv.shape().len() != 2 {
            return Err(AutodiffError::BadShape {
                op: "column",
                expected: "a matrix",
                got: wv.shape().to_vec(),
            });
        }
        if col >= wv.cols() {
            return Err(AutodiffError::IndexOutOfRange {
                op: "column",
                index: col,
                size: wv.cols(),
            });
        }
        let (rows, cols) = (wv.rows(), wv.cols());
        let out: Vec<f64> = (0..rows).map(|i| wv.data()[i * cols + col]).collect();
        Ok(self.push(Op::ColumnPick { w, col }, Tensor::vector(out)))
    }

    // ── Backward ─────────────────────────────────────────────────────

    /// Reverse pass from a scalar loss. For every parameter leaf reachable
    /// from `loss`, dLoss/dParam is ADDED into `Parameter.grad` in the store;
    /// unreachable parameters are untouched. Calling backward again without a
    /// grad reset accumulates — that is how batches sum per-example grads.
    pub fn backward(&self, loss: NodeId, store: &mut ParamStore) -> Result<()> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(AutodiffError::BadShape {
                op: "backward",
                expected: "a scalar loss",
                got: lv.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            match &self.nodes[idx].op {
                Op::Constant => {}
                Op::Param(pid) => {
                    let pg = store.param_mut(*pid).grad.data_mut();
                    for (dst, src) in pg.iter_mut().zip(&g) {
                        *dst += src;
                    }
                }
                Op::MatVec { w, x } => {
                    let (m, n) = (self.value(*w).rows(), self.value(*w).cols());
                    {
                        let xd = self.value(*x).data().to_vec();
                        let gw = Self::slot(&mut grads, *w, m * n);
                        for i in 0..m {
                            for j in 0..n {
                                gw[i * n + j] += g[i] * xd[j];
                            }
                        }
                    }
                    {
                        let wd = self.value(*w).data().to_vec();
                        let gx = Self::slot(&mut grads, *x, n);
                        for j in 0..n {
                            let mut acc = 0.0;
                            for i in 0..m {
                                acc += g[i] * wd[i * n + j];
                            }
                            gx[j] += acc;
                        }
                    }
                }
                Op::AddN(xs) => {
                    for &xid in xs {
                        let gx = Self::slot(&mut grads, xid, g.len());
                        for (dst, src) in gx.iter_mut().zip(&g) {
                            *dst += src;
                        }
                    }
                }
                Op::Hadamard { a, b } => {
                    let av = self.value(*a).data().to_vec();
                    let bv = self.value(*b).data().to_vec();
                    let ga = Self::slot(&mut grads, *a, g.len());
                    for (i, dst) in ga.iter_mut().enumerate() {
                        *dst += g[i] * bv[i];
                    }
                    let gb = Self::slot(&mut grads, *b, g.len());
                    for (i, dst) in gb.iter_mut().enumerate() {
                        *dst += g[i] * av[i];
                    }
                }
                Op::Sigmoid(x) => {
                    let sv = self.nodes[idx].value.data().to_vec();
                    let gx = Self::slot(&mut grads, *x, g.len());
                    for (i, dst) in gx.iter_mut().enumerate() {
                        *dst += g[i] * sv[i] * (1.0 - sv[i]);
                    }
                }
                Op::Tanh(x) => {
                    let tv = self.nodes[idx].value.data().to_vec();
                    let gx = Self::slot(&mut grads, *x, g.len());
                    for (i, dst) in gx.iter_mut().enumerate() {
                        *dst += g[i] * (1.0 - tv[i] * tv[i]);
                    }
                }
                Op::Relu(x) => {
                    let rv = self.nodes[idx].value.data().to_vec();
                    let gx = Self::slot(&mut grads, *x, g.len());
                    for (i, dst) in gx.iter_mut().enumerate() {
                        if rv[i] > 0.0 {
                            *dst += g[i];
                        }
                    }
                }
                Op::AbsDiff { a, b } => {
                    let av = self.value(*a).data().to_vec();
                    let bv = self.value(*b).data().to_vec();
                    // subgradient: 0 at a == b (f64::signum maps +0.0 to 1.0)
                    let signs: Vec<f64> = av
                        .iter()
                        .zip(&bv)
                        .map(|(x, y)| {
                            let d = x - y;
                            if d > 0.0 {
                                1.0
                            } else if d < 0.0 {
                                -1.0
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    let ga = Self::slot(&mut grads, *a, g.len());
                    for (i, dst) in ga.iter_mut().enumerate() {
                        *dst += g[i] * signs[i];
                    }
                    let gb = Self::slot(&mut grads, *b, g.len());
                    for (i, dst) in gb.iter_mut().enumerate() {
                        *dst -= g[i] * signs[i];
                    }
                }
                Op::Scale { x, k } => {
                    let gx = Self::slot(&mut grads, *x, g.len());
                    for (dst, src) in gx.iter_mut().zip(&g) {
                        *dst += src * k;
                    }
                }
                Op::Softmax(x) => {
                    let pv = self.nodes[idx].value.data().to_vec();
                    let dot: f64 = g.iter().zip(&pv).map(|(gi, pi)| gi * pi).sum();
                    let gx = Self::slot(&mut grads, *x, g.len());
                    for (i, dst) in gx.iter_mut().enumerate() {
                        *dst += pv[i] * (g[i] - dot);
                    }
                }
                Op::Dot { a, b } => {
                    let av = self.value(*a).data().to_vec();
                    let bv = self.value(*b).data().to_vec();
                    let ga = Self::slot(&mut grads, *a, av.len());
                    for (i, dst) in ga.iter_mut().enumerate() {
                        *dst += g[0] * bv[i];
                    }
                    let gb = Self::slot(&mut grads, *b, bv.len());
                    for (i, dst) in gb.iter_mut().enumerate() {
                        *dst += g[0] * av[i];
                    }
                }
                Op::SumSq(x) => {
                    let xv = self.value(*x).data().to_vec();
                    let gx = Self::slot(&mut grads, *x, xv.len());
                    for (i, dst) in gx.iter_mut().enumerate() {
                        *dst += 2.0 * g[0] * xv[i];
                    }
                }
                Op::KlDiv { target, q } => {
                    let qv = self.value(*q).data().to_vec();
                    let gq = Self::slot(&mut grads, *q, qv.len());
                    for (i, dst) in gq.iter_mut().enumerate() {
                        let t = target.data()[i];
                        if t > 0.0 {
                            *dst -= g[0] * t / qv[i];
                        }
                    }
                }
                Op::NllPick { probs, class } => {
                    let pv = self.value(*probs).data().to_vec();
                    let gp = Self::slot(&mut grads, *probs, pv.len());
                    gp[*class] -= g[0] / pv[*class];
                }
                Op::ColumnPick { w, col } => {
                    let (rows, cols) = (self.value(*w).rows(), self.value(*w).cols());
                    let gw = Self::slot(&mut grads, *w, rows * cols);
                    for (i, gi) in g.iter().enumerate() {
                        gw[i * cols + col] += gi;
                    }
                }
            }
        }
        Ok(())
    }

    fn slot(grads: &mut [Option<Vec<f64>>], id: NodeId, len: usize) -> &mut Vec<f64> {
        grads[id.0].get_or_insert_with(|| vec![0.0; len])
    }
}

// ── Gradient checking ────────────────────────────────────────────────

/// Compare analytic gradients against central finite differences.
///
/// `build_loss` must rebuild the loss graph deterministically from the current
/// store values. Returns the max over all elements of
/// `|analytic − numeric| / max(|analytic|, |numeric|, 1e-8)`.
pub fn grad_check<F>(
    store: &mut ParamStore,
    ids: &[ParamId],
    eps: f64,
    mut build_loss: F,
) -> Result<f64>
where
    F: FnMut(&ParamStore) -> Result<(Tape, NodeId)>,
{
    assert!(eps > 0.0, "grad_check eps must be positive");
    store.reset_grads();
    let (tape, loss) = build_loss(store)?;
    tape.backward(loss, store)?;
    let analytic: Vec<Vec<f64>> = ids
        .iter()
        .map(|&id| store.param(id).grad.data().to_vec())
        .collect();

    let mut max_rel = 0.0f64;
    for (pi, &id) in ids.iter().enumerate() {
        for k in 0..store.value(id).len() {
            let orig = store.value(id).data()[k];
            store.param_mut(id).value.data_mut()[k] = orig + eps;
            let (tape, loss) = build_loss(store)?;
            let up = tape.value(loss).item();
            store.param_mut(id).value.data_mut()[k] = orig - eps;
            let (tape, loss) = build_loss(store)?;
            let down = tape.value(loss).item();
            store.param_mut(id).value.data_mut()[k] = orig;

            let numeric = (up - down) / (2.0 * eps);
            let a = analytic[pi][k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            max_rel = max_rel.max(rel);
        }
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ident(n: usize) -> Tensor {
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            d[i * n + i] = 1.0;
        }
        Tensor::matrix(n, n, d).unwrap()
    }

    #[test]
    fn matvec_identity_and_zero() {
        let mut t = Tape::new();
        let w = t.constant(ident(2));
        let x = t.constant(Tensor::vector(vec![3.0, 4.0]));
        let y = t.matvec(w, x).unwrap();
        assert_eq!(t.value(y).data(), &[3.0, 4.0]);

        let z = t.constant(Tensor::matrix(2, 2, vec![0.0; 4]).unwrap());
        let y0 = t.matvec(z, x).unwrap();
        assert_eq!(t.value(y0).data(), &[0.0, 0.0]);
    }

    #[test]
    fn matvec_hand_case() {
        // [[1,2],[3,4]] · [1,1] = [3,7]
        let mut t = Tape::new();
        let w = t.constant(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let x = t.constant(Tensor::vector(vec![1.0, 1.0]));
        let y = t.matvec(w, x).unwrap();
        assert_eq!(t.value(y).data(), &[3.0, 7.0]);
    }

    #[test]
    fn matvec_shape_error_names_both_shapes() {
        let mut t = Tape::new();
        let w = t.constant(ident(2));
        let x = t.constant(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let err = t.matvec(w, x).unwrap_err();
        assert_eq!(
            err,
            AutodiffError::ShapeMismatch {
                op: "matvec",
                left: vec![2, 2],
                right: vec![3],
            }
        );
    }

    #[test]
    fn elementwise_basics() {
        let mut t = Tape::new();
        let zero = t.constant(Tensor::vector(vec![0.0; 3]));
        let s = t.sigmoid(zero);
        assert_eq!(t.value(s).data(), &[0.5, 0.5, 0.5]);
        let th = t.tanh(zero);
        assert_eq!(t.value(th).data(), &[0.0, 0.0, 0.0]);

        let a = t.constant(Tensor::vector(vec![1.0, 2.0]));
        let b = t.constant(Tensor::vector(vec![3.0, 4.0]));
        let h = t.hadamard(a, b).unwrap();
        assert_eq!(t.value(h).data(), &[3.0, 8.0]);

        let d = t.abs_diff(a, b).unwrap();
        assert_eq!(t.value(d).data(), &[2.0, 2.0]);
    }

    #[test]
    fn softmax_cases() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::vector(vec![0.0, 0.0]));
        let p = t.softmax(x).unwrap();
        assert_eq!(t.value(p).data(), &[0.5, 0.5]);

        // [ln 2, 0] → [2/3, 1/3]
        let x = t.constant(Tensor::vector(vec![2.0f64.ln(), 0.0]));
        let p = t.softmax(x).unwrap();
        let pv = t.value(p).data();
        assert!((pv[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((pv[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn softmax_shift_invariance_and_normalization() {
        let v = vec![0.3, -1.2, 2.5, 0.0, 7.1];
        let p1 = softmax_slice(&v);
        let shifted: Vec<f64> = v.iter().map(|x| x + 123.456).collect();
        let p2 = softmax_slice(&shifted);
        for (a, b) in p1.iter().zip(&p2) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((p1.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p1.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn kl_cases() {
        let p = vec![0.25, 0.75];
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);

        // KL([1,0], [0.5,0.5]) = ln 2
        let v = kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((v - 2.0f64.ln()).abs() < 1e-15);

        // zero support where p has mass
        let err = kl_divergence(&[0.5, 0.5], &[1.0, 0.0]).unwrap_err();
        assert_eq!(err, AutodiffError::KlZeroSupport { index: 1 });
    }

    #[test]
    fn backward_quadratic() {
        // loss = Σ x_i² → grad 2x
        let mut store = ParamStore::new();
        let x = store.register("x", Tensor::vector(vec![1.0, -2.0, 3.0]));
        let mut t = Tape::new();
        let xn = t.param(&store, x);
        let loss = t.sum_sq(xn);
        t.backward(loss, &mut store).unwrap();
        assert_eq!(store.param(x).grad.data(), &[2.0, -4.0, 6.0]);
    }

    #[test]
    fn backward_sigmoid_dot_at_zero() {
        // loss = σ(w·x) at w = 0 → grad_w = 0.25·x
        let mut store = ParamStore::new();
        let w = store.register("w", Tensor::vector(vec![0.0, 0.0]));
        let mut t = Tape::new();
        let wn = t.param(&store, w);
        let xn = t.constant(Tensor::vector(vec![3.0, -1.0]));
        let d = t.dot(wn, xn).unwrap();
        let loss = t.sigmoid(d);
        t.backward(loss, &mut store).unwrap();
        assert_eq!(store.param(w).grad.data(), &[0.75, -0.25]);
    }

    #[test]
    fn backward_untouched_param_keeps_zero_grad() {
        let mut store = ParamStore::new();
        let a = store.register("a", Tensor::vector(vec![1.0]));
        let b = store.register("b", Tensor::vector(vec![1.0]));
        let mut t = Tape::new();
        let an = t.param(&store, a);
        let loss = t.sum_sq(an);
        t.backward(loss, &mut store).unwrap();
        assert_eq!(store.param(b).grad.data(), &[0.0]);
    }

    #[test]
    fn backward_accumulates_without_reset() {
        let mut store = ParamStore::new();
        let x = store.register("x", Tensor::vector(vec![2.0]));
        let mut t = Tape::new();
        let xn = t.param(&store, x);
        let loss = t.sum_sq(xn);
        t.backward(loss, &mut store).unwrap();
        t.backward(loss, &mut store).unwrap();
        assert_eq!(store.param(x).grad.data(), &[8.0]);
        store.reset_grads();
        assert_eq!(store.param(x).grad.data(), &[0.0]);
    }

    #[test]
    fn backward_is_deterministic_bitwise() {
        let mut store = ParamStore::new();
        let w = store.register(
            "w",
            Tensor::matrix(3, 3, (0..9).map(|i| 0.1 * i as f64 - 0.4).collect()).unwrap(),
        );
        let run = |store: &mut ParamStore| -> Vec<f64> {
            store.reset_grads();
            let mut t = Tape::new();
            let wn = t.param(store, w);
            let x = t.constant(Tensor::vector(vec![0.3, -0.7, 1.1]));
            let y = t.matvec(wn, x).unwrap();
            let s = t.tanh(y);
            let p = t.softmax(s).unwrap();
            let loss = t.nll_pick(p, 1).unwrap();
            t.backward(loss, store).unwrap();
            store.param(w).grad.data().to_vec()
        };
        let g1 = run(&mut store);
        let g2 = run(&mut store);
        assert_eq!(g1, g2);
    }

    #[test]
    fn grad_check_quadratic_is_exact() {
        let mut store = ParamStore::new();
        let x = store.register("x", Tensor::vector(vec![0.7, -1.3, 0.2]));
        let err = grad_check(&mut store, &[x], 1e-5, |s| {
            let mut t = Tape::new();
            let xn = t.param(s, x);
            let loss = t.sum_sq(xn);
            Ok((t, loss))
        })
        .unwrap();
        assert!(err < 1e-9, "quadratic grad check should be exact: {err}");
    }

    #[test]
    fn grad_check_dead_branch_reports_zero_everywhere() {
        let mut store = ParamStore::new();
        let live = store.register("live", Tensor::vector(vec![0.5]));
        let dead = store.register("dead", Tensor::vector(vec![0.5]));
        let err = grad_check(&mut store, &[dead], 1e-5, |s| {
            let mut t = Tape::new();
            let xn = t.param(s, live);
            let loss = t.sum_sq(xn);
            Ok((t, loss))
        })
        .unwrap();
        assert_eq!(err, 0.0);
        assert_eq!(store.param(dead).grad.data(), &[0.0]);
    }

    #[test]
    fn column_pick_forward_and_backward() {
        let mut store = ParamStore::new();
        let w = store.register(
            "w",
            Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap(),
        );
        let mut t = Tape::new();
        let wn = t.param(&store, w);
        let c = t.column(wn, 1).unwrap();
        assert_eq!(t.value(c).data(), &[2.0, 5.0]);
        let loss = t.sum_sq(c);
        t.backward(loss, &mut store).unwrap();
        assert_eq!(
            store.param(w).grad.data(),
            &[0.0, 4.0, 0.0, 0.0, 10.0, 0.0]
        );
    }

    #[test]
    fn param_leaf_is_cached_per_tape() {
        let mut store = ParamStore::new();
        let x = store.register("x", Tensor::vector(vec![1.0]));
        let mut t = Tape::new();
        let a = t.param(&store, x);
        let b = t.param(&store, x);
        assert_eq!(a, b);
    }
}
