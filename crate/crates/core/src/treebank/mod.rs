//! Treebank, dataset, and embedding ingestion.
//!
//! Trees arrive pre-parsed (running a dependency parser is out of scope);
//! this module reads them from reduced-CoNLL files, loads pre-trained word
//! embeddings, parses sentence-pair and phrase-sentiment datasets, and
//! attaches sentiment labels to tree nodes by phrase-span matching.

mod conll;
mod dataset;
mod embeddings;
mod inventory;
mod tree;

pub use conll::{parse_conll, to_conll};
pub use dataset::{
    label_nodes_by_phrase, load_pair_dataset, load_sentiment_sidecar, MatchStats, PairExample,
    PairRecord, PhraseLabel, SentimentTree,
};
pub use embeddings::{deterministic_oov_row, load_embeddings, EmbeddingTable};
pub use inventory::RelationInventory;
pub use tree::{DepToken, DepTree};

#[derive(Debug, thiserror::Error)]
pub enum TreebankError {
    #[error("line {line}: malformed token line: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("sentence at line {line}: {reason}")]
    BadTree { line: usize, reason: String },
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("line {line}: expected {expected} embedding values, found {got}")]
    EmbeddingDim {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: relatedness score {score} outside [1, {k}]")]
    ScoreOutOfRange { line: usize, score: f64, k: usize },
    #[error("missing column {0:?} in dataset header")]
    MissingColumn(&'static str),
    #[error("line {line}: {reason}")]
    BadRecord { line: usize, reason: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
