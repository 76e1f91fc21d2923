//! Task heads: the Siamese relatedness scorer with its sparse target
//! distributions and KL objective, and the per-node sentiment classifier
//! with its NLL objective.

use crate::autodiff::{AutodiffError, NodeId, ParamId, ParamStore, Tape};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum HeadError {
    #[error("target score {y} outside [1, {k}]")]
    ScoreOutOfRange { y: f64, k: usize },
    #[error("loss over an empty batch")]
    EmptyBatch,
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

type Result<T> = std::result::Result<T, HeadError>;

/// Siamese comparison head. From a sentence-vector pair it forms the
/// pointwise product and absolute difference, maps them through a hidden
/// comparison layer, and emits a distribution over the score classes
/// 1..K; the predicted score is the distribution's expectation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RelatednessHead {
    /// h×d over h_l ⊙ h_r
    pub u: ParamId,
    /// h×d over |h_l − h_r|
    pub v: ParamId,
    /// comparison-layer bias, length h
    pub b_h: ParamId,
    /// K×h classifier
    pub w: ParamId,
    /// classifier bias, length K
    pub b_p: ParamId,
    pub score_classes: usize,
}

impl RelatednessHead {
    pub fn ids(&self) -> [ParamId; 5] {
        [self.u, self.v, self.b_h, self.w, self.b_p]
    }
}

/// Per-node binary sentiment classifier.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SentimentHead {
    /// K×d
    pub w: ParamId,
    /// length K
    pub b: ParamId,
    pub classes: usize,
}

impl SentimentHead {
    pub fn ids(&self) -> [ParamId; 2] {
        [self.w, self.b]
    }
}

pub struct RelatednessOutput {
    pub probs: NodeId,
    /// Expectation r·p̂ over classes 1..K; always inside [1, K].
    pub score: f64,
}

/// h_s = σ(U(h_l⊙h_r) + V|h_l−h_r| + b_h); p̂ = softmax(W h_s + b_p).
/// Symmetric in the pair by construction: ⊙ commutes and |·| is symmetric.
pub fn relatedness_forward(
    tape: &mut Tape,
    store: &ParamStore,
    head: &RelatednessHead,
    h_l: NodeId,
    h_r: NodeId,
) -> Result<RelatednessOutput> {
    let prod = tape.hadamard(h_l, h_r)?;
    let diff = tape.abs_diff(h_l, h_r)?;
    let un = tape.param(store, head.u);
    let vn = tape.param(store, head.v);
    let bh = tape.param(store, head.b_h);
    let up = tape.matvec(un, prod)?;
    let vd = tape.matvec(vn, diff)?;
    let pre = tape.add_n(&[up, vd, bh])?;
    let hs = tape.sigmoid(pre);

    let wn = tape.param(store, head.w);
    let bp = tape.param(store, head.b_p);
    let wh = tape.matvec(wn, hs)?;
    let logits = tape.add(wh, bp)?;
    let probs = tape.softmax(logits)?;
    let score = expected_score(tape.value(probs).data());
    Ok(RelatednessOutput { probs, score })
}

/// r·p for r = [1, 2, …, K].
pub fn expected_score(probs: &[f64]) -> f64 {
    probs
        .iter()
        .enumerate()
        .map(|(i, p)| (i + 1) as f64 * p)
        .sum()
}

/// Sparse two-entry target distribution over classes 1..K whose expectation
/// recovers the real-valued score exactly: p_⌊y⌋ and p_⌈y⌉ split the mass,
/// everything else is zero.
pub fn target_distribution(y: f64, k: usize) -> Result<Tensor> {
    if !(1.0..=k as f64).contains(&y) {
        return Err(HeadError::ScoreOutOfRange { y, k });
    }
    let mut p = vec![0.0; k];
    let floor = y.floor();
    let frac = y - floor;
    let idx = floor as usize - 1;
    if frac == 0.0 {
        p[idx] = 1.0;
    } else {
        p[idx] = 1.0 - frac;
        p[idx + 1] = frac;
    }
    Ok(Tensor::vector(p))
}

/// Mean KL(target ‖ predicted) over the batch plus the L2 penalty
/// (λ/2)·Σ‖θ‖² over `l2_params`.
pub fn relatedness_loss(
    tape: &mut Tape,
    store: &ParamStore,
    head: &RelatednessHead,
    batch: &[(NodeId, NodeId, f64)],
    lambda: f64,
    l2_params: &[ParamId],
) -> Result<NodeId> {
    if batch.is_empty() {
        return Err(HeadError::EmptyBatch);
    }
    let mut kls = Vec::with_capacity(batch.len());
    for &(h_l, h_r, y) in batch {
        let out = relatedness_forward(tape, store, head, h_l, h_r)?;
        let target = target_distribution(y, head.score_classes)?;
        kls.push(tape.kl_div(&target, out.probs)?);
    }
    let total = tape.add_n(&kls)?;
    let mean = tape.scale(total, 1.0 / batch.len() as f64);
    attach_l2(tape, store, mean, lambda, l2_params).map_err(Into::into)
}

/// softmax(W h + b) over sentiment classes.
pub fn sentiment_forward(
    tape: &mut Tape,
    store: &ParamStore,
    head: &SentimentHead,
    h: NodeId,
) -> Result<NodeId> {
    let wn = tape.param(store, head.w);
    let bn = tape.param(store, head.b);
    let wh = tape.matvec(wn, h)?;
    let logits = tape.add(wh, bn)?;
    Ok(tape.softmax(logits)?)
}

/// Index of the maximum probability; ties break to the lowest index.
pub fn predict_label(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// −(1/m) Σ log p̂(y) over `m` labeled nodes plus the L2 penalty. `m` counts
/// labeled nodes, not sentences.
pub fn sentiment_loss(
    tape: &mut Tape,
    store: &ParamStore,
    head: &SentimentHead,
    labeled: &[(NodeId, u8)],
    lambda: f64,
    l2_params: &[ParamId],
) -> Result<NodeId> {
    if labeled.is_empty() {
        return Err(HeadError::EmptyBatch);
    }
    let mut nlls = Vec::with_capacity(labeled.len());
    for &(h, y) in labeled {
        let probs = sentiment_forward(tape, store, head, h)?;
        nlls.push(tape.nll_pick(probs, y as usize)?);
    }
    let total = tape.add_n(&nlls)?;
    let mean = tape.scale(total, 1.0 / labeled.len() as f64);
    attach_l2(tape, store, mean, lambda, l2_params).map_err(Into::into)
}

/// loss + (λ/2)·Σ_θ ‖θ‖², skipped entirely when λ = 0 or θ is empty.
pub fn attach_l2(
    tape: &mut Tape,
    store: &ParamStore,
    loss: NodeId,
    lambda: f64,
    l2_params: &[ParamId],
) -> std::result::Result<NodeId, AutodiffError> {
    if lambda == 0.0 || l2_params.is_empty() {
        return Ok(loss);
    }
    let sq: Vec<NodeId> = l2_params
        .iter()
        .map(|&id| {
            let leaf = tape.param(store, id);
            tape.sum_sq(leaf)
        })
        .collect();
    let total = tape.add_n(&sq)?;
    let penalty = tape.scale(total, lambda / 2.0);
    tape.add(loss, penalty)
}
