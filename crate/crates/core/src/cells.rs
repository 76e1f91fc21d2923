//! Cell computations: standard LSTM, child-sum tree LSTM, the relation gate,
//! and the typed (relation-gated) child-sum cell, plus whole-tree encoding
//! and the multi-parent hidden-state generalization for DAG inputs.

use crate::autodiff::{AutodiffError, NodeId, ParamId, ParamStore, Tape};
use crate::tensor::Tensor;
use crate::treebank::{DepTree, EmbeddingTable, RelationInventory};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

type Result<T> = std::result::Result<T, AutodiffError>;

/// Nonlinearity of the relation gate. The gate and candidate activations of
/// the cell itself are fixed by the transition equations; only the relation
/// gate is configurable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: NodeId) -> NodeId {
        match self {
            Activation::Sigmoid => tape.sigmoid(x),
            Activation::Tanh => tape.tanh(x),
            Activation::Relu => tape.relu(x),
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Activation {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(format!(
                "unknown activation {other:?}; expected sigmoid, tanh, or relu"
            )),
        }
    }
}

/// Weights of one cell: for each gate g ∈ {i, f, o, u}, an input weight
/// `W^(g)` (d×e), a recurrent weight `U^(g)` (d×d) and a bias `b^(g)` (d).
/// The same set is shared by every node of a tree.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CellParams {
    pub w_i: ParamId,
    pub u_i: ParamId,
    pub b_i: ParamId,
    pub w_f: ParamId,
    pub u_f: ParamId,
    pub b_f: ParamId,
    pub w_o: ParamId,
    pub u_o: ParamId,
    pub b_o: ParamId,
    pub w_u: ParamId,
    pub u_u: ParamId,
    pub b_u: ParamId,
}

impl CellParams {
    pub fn ids(&self) -> [ParamId; 12] {
        [
            self.w_i, self.u_i, self.b_i, self.w_f, self.u_f, self.b_f, self.w_o, self.u_o,
            self.b_o, self.w_u, self.u_u, self.b_u,
        ]
    }
}

/// The relation gate `r = g(W^(r) z + b^(r))` with `z` one-hot over the
/// relation inventory. `W^(r)` is d×l; column j is the learned embedding of
/// dependency type j, so the product is a column select, never a dense
/// matvec.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RelationGateParams {
    pub w: ParamId,
    pub b: ParamId,
    pub activation: Activation,
    /// Test hook: when set, the gate output is replaced by this constant
    /// vector (no gradient flows through it). Never serialized; the
    /// reduction tests force the all-ones gate through it.
    #[serde(skip)]
    pub override_output: Option<Vec<f64>>,
}

/// Cell output at one tree node.
#[derive(Clone, Copy, Debug)]
pub struct NodeState {
    pub c: NodeId,
    pub h: NodeId,
}

// W x + U h + b, the body of every gate
fn gate_affine(
    tape: &mut Tape,
    store: &ParamStore,
    w: ParamId,
    u: ParamId,
    b: ParamId,
    x: NodeId,
    h: NodeId,
) -> Result<NodeId> {
    let wn = tape.param(store, w);
    let un = tape.param(store, u);
    let bn = tape.param(store, b);
    let wx = tape.matvec(wn, x)?;
    let uh = tape.matvec(un, h)?;
    tape.add_n(&[wx, uh, bn])
}

/// Standard sequential LSTM transition.
pub fn lstm_step(
    tape: &mut Tape,
    store: &ParamStore,
    p: &CellParams,
    x: NodeId,
    h_prev: NodeId,
    c_prev: NodeId,
) -> Result<NodeState> {
    let i_pre = gate_affine(tape, store, p.w_i, p.u_i, p.b_i, x, h_prev)?;
    let i = tape.sigmoid(i_pre);
    let f_pre = gate_affine(tape, store, p.w_f, p.u_f, p.b_f, x, h_prev)?;
    let f = tape.sigmoid(f_pre);
    let o_pre = gate_affine(tape, store, p.w_o, p.u_o, p.b_o, x, h_prev)?;
    let o = tape.sigmoid(o_pre);
    let u_pre = gate_affine(tape, store, p.w_u, p.u_u, p.b_u, x, h_prev)?;
    let u = tape.tanh(u_pre);

    let iu = tape.hadamard(i, u)?;
    let fc = tape.hadamard(f, c_prev)?;
    let c = tape.add(iu, fc)?;
    let tc = tape.tanh(c);
    let h = tape.hadamard(o, tc)?;
    Ok(NodeState { c, h })
}

/// Everything of the child-sum transition up to and including the cell
/// state: gates i, o and candidate u from (x, Σ h_k), one forget gate per
/// child from (x, h_k), and c = i⊙u + Σ f_k⊙c_k. The hidden state is
/// assembled by the caller, which is where the typed and untyped cells
/// differ.
fn childsum_core(
    tape: &mut Tape,
    store: &ParamStore,
    p: &CellParams,
    x: NodeId,
    children: &[NodeState],
) -> Result<(NodeId, NodeId)> {
    let dim = store.value(p.b_i).len();
    let h_sum = if children.is_empty() {
        tape.constant(Tensor::zeros(&[dim]))
    } else {
        let hs: Vec<NodeId> = children.iter().map(|s| s.h).collect();
        tape.add_n(&hs)?
    };

    let i_pre = gate_affine(tape, store, p.w_i, p.u_i, p.b_i, x, h_sum)?;
    let i = tape.sigmoid(i_pre);
    let o_pre = gate_affine(tape, store, p.w_o, p.u_o, p.b_o, x, h_sum)?;
    let o = tape.sigmoid(o_pre);
    let u_pre = gate_affine(tape, store, p.w_u, p.u_u, p.b_u, x, h_sum)?;
    let u = tape.tanh(u_pre);

    let mut c_terms = vec![tape.hadamard(i, u)?];
    for child in children {
        let f_pre = gate_affine(tape, store, p.w_f, p.u_f, p.b_f, x, child.h)?;
        let f = tape.sigmoid(f_pre);
        c_terms.push(tape.hadamard(f, child.c)?);
    }
    let c = tape.add_n(&c_terms)?;
    Ok((c, o))
}

/// Child-sum tree LSTM transition over an unordered child set. Summation
/// runs in the order the children are listed; callers that need a fixed
/// reduction order (the tree encoder does) list children canonically.
pub fn childsum_step(
    tape: &mut Tape,
    store: &ParamStore,
    p: &CellParams,
    x: NodeId,
    children: &[NodeState],
) -> Result<NodeState> {
    let (c, o) = childsum_core(tape, store, p, x, children)?;
    let tc = tape.tanh(c);
    let h = tape.hadamard(o, tc)?;
    Ok(NodeState { c, h })
}

/// Gate vector for relation index `rel`: `g(column_rel(W^(r)) + b^(r))`.
pub fn relation_gate(
    tape: &mut Tape,
    store: &ParamStore,
    rp: &RelationGateParams,
    rel: usize,
) -> Result<NodeId> {
    if let Some(v) = &rp.override_output {
        return Ok(tape.constant(Tensor::vector(v.clone())));
    }
    let wn = tape.param(store, rp.w);
    let col = tape.column(wn, rel)?;
    let bn = tape.param(store, rp.b);
    let pre = tape.add(col, bn)?;
    Ok(rp.activation.apply(tape, pre))
}

/// Typed child-sum transition: identical to [`childsum_step`] through the
/// cell state, then h = o ⊙ tanh(c ⊙ r) with r the relation gate of the
/// node's edge to its parent. The cell state passed upward is not gated;
/// only the hidden state is.
pub fn typed_childsum_step(
    tape: &mut Tape,
    store: &ParamStore,
    p: &CellParams,
    rp: &RelationGateParams,
    x: NodeId,
    rel: usize,
    children: &[NodeState],
) -> Result<NodeState> {
    let (c, o) = childsum_core(tape, store, p, x, children)?;
    let r = relation_gate(tape, store, rp, rel)?;
    let cr = tape.hadamard(c, r)?;
    let tcr = tape.tanh(cr);
    let h = tape.hadamard(o, tcr)?;
    Ok(NodeState { c, h })
}

/// The DAG generalization: a node with several parents emits one hidden
/// state per parent edge, h_{t,t'} = o ⊙ tanh(c ⊙ r_{t,t'}), all sharing the
/// single relation gate parameter set.
pub fn multi_parent_hidden(
    tape: &mut Tape,
    store: &ParamStore,
    rp: &RelationGateParams,
    o: NodeId,
    c: NodeId,
    parent_rels: &[usize],
) -> Result<Vec<NodeId>> {
    if parent_rels.is_empty() {
        return Err(AutodiffError::BadShape {
            op: "multi_parent_hidden",
            expected: "at least one parent relation",
            got: vec![0],
        });
    }
    let mut out = Vec::with_capacity(parent_rels.len());
    for &rel in parent_rels {
        let r = relation_gate(tape, store, rp, rel)?;
        let cr = tape.hadamard(c, r)?;
        let tcr = tape.tanh(cr);
        out.push(tape.hadamard(o, tcr)?);
    }
    Ok(out)
}

/// Pre-gate cell output for DAG use: (c, o) before any hidden state is
/// formed. Feed to [`multi_parent_hidden`].
pub fn childsum_pregate(
    tape: &mut Tape,
    store: &ParamStore,
    p: &CellParams,
    x: NodeId,
    children: &[NodeState],
) -> Result<(NodeId, NodeId)> {
    childsum_core(tape, store, p, x, children)
}

/// Borrowed view used to encode trees: cell and gate weights, embedding
/// source, and the relation inventory.
pub struct Encoder<'a> {
    pub store: &'a ParamStore,
    pub cell: &'a CellParams,
    pub gate: &'a RelationGateParams,
    /// false runs the untyped child-sum baseline everywhere.
    pub typed: bool,
    pub embeddings: &'a EmbeddingTable,
    pub inventory: &'a RelationInventory,
    /// Rows promoted to trainable parameters when embedding fine-tuning is
    /// on; every other form stays a constant.
    pub tuned_rows: Option<&'a BTreeMap<String, ParamId>>,
}

impl Encoder<'_> {
    fn input_leaf(&self, tape: &mut Tape, form: &str) -> NodeId {
        if let Some(rows) = self.tuned_rows {
            if let Some(&id) = rows.get(&form.to_lowercase()) {
                return tape.param(self.store, id);
            }
        }
        let row = self.embeddings.lookup(form);
        tape.constant(Tensor::vector(row.into_owned()))
    }

    /// Encode every node of the tree, children before parents. A node's
    /// relation index is the deprel on its edge to its parent; the root word
    /// uses the "root" relation. Children are reduced in ascending token
    /// order no matter how the tree's child lists are arranged, so encoding
    /// is invariant to child-list permutation, bitwise.
    ///
    /// Returns one state per token, indexed by token position − 1.
    pub fn encode(&self, tape: &mut Tape, tree: &DepTree) -> Result<Vec<NodeState>> {
        let mut states: Vec<Option<NodeState>> = vec![None; tree.len() + 1];
        for node in tree.post_order() {
            let mut child_ids = tree.children[node].clone();
            child_ids.sort_unstable();
            let children: Vec<NodeState> = child_ids
                .iter()
                .map(|&c| states[c].expect("post-order visits children first"))
                .collect();
            let tok = tree.token(node);
            let x = self.input_leaf(tape, &tok.form);
            let state = if self.typed {
                let rel = if tok.head == 0 {
                    self.inventory.root_index()
                } else {
                    self.inventory.index_of(&tok.deprel)
                };
                typed_childsum_step(tape, self.store, self.cell, self.gate, x, rel, &children)?
            } else {
                childsum_step(tape, self.store, self.cell, x, &children)?
            };
            states[node] = Some(state);
        }
        Ok(tree
            .tokens
            .iter()
            .map(|t| states[t.index].expect("all nodes encoded"))
            .collect())
    }

    /// Sentence representation: the (gated) hidden state of the root word.
    pub fn sentence(&self, tape: &mut Tape, tree: &DepTree) -> Result<NodeId> {
        let states = self.encode(tape, tree)?;
        Ok(states[tree.root_token - 1].h)
    }
}
