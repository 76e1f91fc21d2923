//! Relation-gated LSTM and typed dependency Tree-LSTM for sentence modeling.
//!
//! The library composes sentence vectors over dependency parse trees with a
//! child-sum Tree-LSTM whose hidden state is modulated by a learned gate on
//! the grammatical relation (deprel) between each word and its head. It ships
//! the full pipeline: treebank and embedding ingestion, reverse-mode autodiff
//! over per-example graphs, the cell and task heads, Adagrad training with
//! early stopping, evaluation metrics, and analysis of the learned relation
//! embeddings.

pub mod analysis;
pub mod autodiff;
pub mod cells;
pub mod heads;
pub mod metrics;
pub mod model;
pub mod synth;
pub mod tensor;
pub mod training;
pub mod treebank;

pub use autodiff::{grad_check, ParamId, ParamStore, Parameter, Tape};

pub use tensor::Tensor;
