//! Dependency trees as parsed token lists plus derived child sets.

use super::TreebankError;
use serde::{Deserialize, Serialize};

/// One parsed token. `index` is 1-based sentence position; `head` is the
/// 1-based index of the governing token, with 0 meaning the ROOT pseudo-node;
/// `deprel` is the dependency-type label on the edge to the head.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepToken {
    pub index: usize,
    pub form: String,
    pub head: usize,
    pub deprel: String,
}

impl DepToken {
    pub fn new(index: usize, form: impl Into<String>, head: usize, deprel: impl Into<String>) -> Self {
        DepToken {
            index,
            form: form.into(),
            head,
            deprel: deprel.into(),
        }
    }
}

/// A validated dependency tree: every token has exactly one head, exactly one
/// token attaches to ROOT, and the head links form a connected acyclic graph.
///
/// `children[t]` lists the dependents of token `t` (1-based; slot 0 is unused).
/// Child sets are unordered by contract; construction stores them in ascending
/// token order, which is also the fixed reduction order used when summing
/// child states.
#[derive(Clone, Debug, PartialEq)]
pub struct DepTree {
    pub tokens: Vec<DepToken>,
    pub children: Vec<Vec<usize>>,
    pub root_token: usize,
}

impl DepTree {
    /// Build and validate a tree from tokens. Errors describe the violation;
    /// the CoNLL parser wraps them with line positions.
    pub fn from_tokens(tokens: Vec<DepToken>) -> Result<Self, TreebankError> {
        let n = tokens.len();
        if n == 0 {
            return Err(TreebankError::InvalidTree("empty sentence".into()));
        }
        for (i, tok) in tokens.iter().enumerate() {
            if tok.index != i + 1 {
                return Err(TreebankError::InvalidTree(format!(
                    "token ids must be 1..{n} in order; found id {} at position {}",
                    tok.index,
                    i + 1
                )));
            }
            if tok.head > n {
                return Err(TreebankError::InvalidTree(format!(
                    "token {} has head {} out of range 0..={n}",
                    tok.index, tok.head
                )));
            }
            if tok.head == tok.index {
                return Err(TreebankError::InvalidTree(format!(
                    "token {} is its own head",
                    tok.index
                )));
            }
        }
        let roots: Vec<usize> = tokens.iter().filter(|t| t.head == 0).map(|t| t.index).collect();
        let root_token = match roots.as_slice() {
            [r] => *r,
            // A rootless head assignment over finitely many tokens always
            // closes a cycle somewhere.
            [] => {
                return Err(TreebankError::InvalidTree(
                    "no root token: head links form a cycle".into(),
                ))
            }
            _ => {
                return Err(TreebankError::InvalidTree(format!(
                    "multiple root tokens: {roots:?}"
                )))
            }
        };
        let mut children = vec![Vec::new(); n + 1];
        for tok in &tokens {
            if tok.head > 0 {
                children[tok.head].push(tok.index);
            }
        }
        // Reachability from the root detects cycles: a cycle's tokens hang
        // off nothing reachable, so the walk comes up short.
        let mut seen = vec![false; n + 1];
        let mut stack = vec![root_token];
        let mut count = 0;
        while let Some(t) = stack.pop() {
            if seen[t] {
                continue;
            }
            seen[t] = true;
            count += 1;
            stack.extend(&children[t]);
        }
        if count != n {
            let missing: Vec<usize> = (1..=n).filter(|&t| !seen[t]).collect();
            return Err(TreebankError::InvalidTree(format!(
                "cycle detected: tokens {missing:?} are not reachable from the root"
            )));
        }
        Ok(DepTree {
            tokens,
            children,
            root_token,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, index: usize) -> &DepToken {
        &self.tokens[index - 1]
    }

    pub fn forms(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.form.as_str())
    }

    /// All token indices in the subtree rooted at `node` (inclusive), sorted
    /// ascending.
    pub fn subtree_span(&self, node: usize) -> Vec<usize> {
        assert!(node >= 1 && node <= self.len(), "node {node} not in tree");
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(t) = stack.pop() {
            out.push(t);
            stack.extend(&self.children[t]);
        }
        out.sort_unstable();
        out
    }

    /// Post-order traversal (children before parents), children visited in
    /// ascending token order regardless of how `children` is currently
    /// arranged.
    pub fn post_order(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.len());
        // (node, child cursor) over sorted children
        let mut sorted: Vec<Vec<usize>> = self.children.clone();
        for c in &mut sorted {
            c.sort_unstable();
        }
        let mut stack = vec![(self.root_token, 0usize)];
        while let Some((node, cursor)) = stack.pop() {
            if cursor < sorted[node].len() {
                stack.push((node, cursor + 1));
                stack.push((sorted[node][cursor], 0));
            } else {
                order.push(node);
            }
        }
        order
    }
}
