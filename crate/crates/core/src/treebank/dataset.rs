//! Task datasets: sentence-pair relatedness rows and phrase-sentiment labels.

use super::tree::DepTree;
use super::TreebankError;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

/// Score scale of the relatedness task.
pub const SCORE_CLASSES: usize = 5;

/// Raw dataset row: the sentences are kept so they can be handed to an
/// external parser; alignment with parsed trees happens in `prepare`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairRecord {
    pub id: String,
    pub sentence_a: String,
    pub sentence_b: String,
    pub score: f64,
}

/// A sentence pair with both sides parsed and a gold score in `[1, K]`.
#[derive(Clone, Debug)]
pub struct PairExample {
    pub left: DepTree,
    pub right: DepTree,
    pub score: f64,
}

/// A parsed tree with binary sentiment labels on a subset of its nodes.
#[derive(Clone, Debug)]
pub struct SentimentTree {
    pub tree: DepTree,
    /// token index → {0, 1}; sorted map so iteration is deterministic.
    pub node_labels: std::collections::BTreeMap<usize, u8>,
}

impl SentimentTree {
    pub fn root_label(&self) -> Option<u8> {
        self.node_labels.get(&self.tree.root_token).copied()
    }
}

/// One sidecar record: a phrase as a token-form sequence plus its binary
/// label (neutral phrases are dropped upstream).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhraseLabel {
    pub tokens: Vec<String>,
    pub label: u8,
}

/// Tab-separated with a header; required columns `pair_ID`, `sentence_A`,
/// `sentence_B`, `relatedness_score`; extra columns ignored.
pub fn load_pair_dataset(path: &Path) -> Result<Vec<PairRecord>, TreebankError> {
    let file = std::fs::File::open(path).map_err(|source| TreebankError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .flexible(true)
        .from_reader(file);

    let headers = reader
        .headers()
        .map_err(|e| TreebankError::BadRecord {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    let col = |name: &'static str| -> Result<usize, TreebankError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or(TreebankError::MissingColumn(name))
    };
    let (ci, ca, cb, cs) = (
        col("pair_ID")?,
        col("sentence_A")?,
        col("sentence_B")?,
        col("relatedness_score")?,
    );

    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // header is line 1
        let record = record.map_err(|e| TreebankError::BadRecord {
            line,
            reason: e.to_string(),
        })?;
        let field = |c: usize| -> Result<&str, TreebankError> {
            record.get(c).ok_or_else(|| TreebankError::BadRecord {
                line,
                reason: format!("missing column {c}"),
            })
        };
        let score: f64 = field(cs)?.parse().map_err(|e| TreebankError::BadRecord {
            line,
            reason: format!("bad score: {e}"),
        })?;
        if !(1.0..=SCORE_CLASSES as f64).contains(&score) {
            return Err(TreebankError::ScoreOutOfRange {
                line,
                score,
                k: SCORE_CLASSES,
            });
        }
        out.push(PairRecord {
            id: field(ci)?.to_string(),
            sentence_a: field(ca)?.to_string(),
            sentence_b: field(cb)?.to_string(),
            score,
        });
    }
    Ok(out)
}

/// JSON-lines sidecar, one `{"tokens": [...], "label": 0|1}` object per line.
pub fn load_sentiment_sidecar(path: &Path) -> Result<Vec<PhraseLabel>, TreebankError> {
    let file = std::fs::File::open(path).map_err(|source| TreebankError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| TreebankError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PhraseLabel =
            serde_json::from_str(&line).map_err(|e| TreebankError::BadRecord {
                line: i + 1,
                reason: e.to_string(),
            })?;
        if rec.label > 1 {
            return Err(TreebankError::BadRecord {
                line: i + 1,
                reason: format!("label must be 0 or 1, found {}", rec.label),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

/// Statistics from phrase-to-node matching.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MatchStats {
    pub nodes_total: usize,
    pub nodes_labeled: usize,
    /// Phrase sequences that occurred more than once in the label set; the
    /// last occurrence won.
    pub conflicting_phrases: usize,
}

/// Attach labels to the nodes of `tree`: a node is labeled iff its subtree
/// span is a contiguous token range and the forms over that range equal some
/// phrase. Non-contiguous spans never match, even when the token multiset
/// does. Duplicate phrase sequences resolve to the last occurrence and are
/// counted in the stats.
pub fn label_nodes_by_phrase(
    tree: &DepTree,
    phrases: &[PhraseLabel],
) -> (SentimentTree, MatchStats) {
    let mut by_phrase: HashMap<&[String], u8> = HashMap::new();
    let mut conflicting = 0usize;
    for p in phrases {
        if by_phrase.insert(p.tokens.as_slice(), p.label).is_some() {
            conflicting += 1;
        }
    }

    let mut node_labels = std::collections::BTreeMap::new();
    for node in 1..=tree.len() {
        let span = tree.subtree_span(node);
        let contiguous = span.last().unwrap() - span.first().unwrap() + 1 == span.len();
        if !contiguous {
            continue;
        }
        let forms: Vec<String> = span.iter().map(|&i| tree.token(i).form.clone()).collect();
        if let Some(&label) = by_phrase.get(forms.as_slice()) {
            node_labels.insert(node, label);
        }
    }
    let stats = MatchStats {
        nodes_total: tree.len(),
        nodes_labeled: node_labels.len(),
        conflicting_phrases: conflicting,
    };
    (
        SentimentTree {
            tree: tree.clone(),
            node_labels,
        },
        stats,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::tree::DepToken;
    use std::io::Write;

    fn write_tsv(rows: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "{rows}").unwrap();
        f
    }

    #[test]
    fn pair_dataset_parses_scores() {
        let f = write_tsv(
            "pair_ID\tsentence_A\tsentence_B\trelatedness_score\tentailment_judgment\n\
             1\tA dog runs\tA cat sits\t4.8\tNEUTRAL\n",
        );
        let rows = load_pair_dataset(f.path()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].score, 4.8);
        assert_eq!(rows[0].sentence_b, "A cat sits");
    }

    #[test]
    fn pair_dataset_rejects_out_of_range_score() {
        let f = write_tsv(
            "pair_ID\tsentence_A\tsentence_B\trelatedness_score\n1\ta\tb\t5.1\n",
        );
        let err = load_pair_dataset(f.path()).unwrap_err();
        assert!(err.to_string().contains("5.1"), "{err}");
    }

    #[test]
    fn pair_dataset_requires_columns() {
        let f = write_tsv("pair_ID\tsentence_A\tscore\n");
        let err = load_pair_dataset(f.path()).unwrap_err();
        assert!(err.to_string().contains("sentence_B"), "{err}");
    }

    fn toy_tree() -> DepTree {
        // "not a great movie": movie is root, not/a/great modify it
        DepTree::from_tokens(vec![
            DepToken::new(1, "not", 4, "neg"),
            DepToken::new(2, "a", 4, "det"),
            DepToken::new(3, "great", 4, "amod"),
            DepToken::new(4, "movie", 0, "root"),
        ])
        .unwrap()
    }

    fn phrase(tokens: &[&str], label: u8) -> PhraseLabel {
        PhraseLabel {
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            label,
        }
    }

    #[test]
    fn single_word_phrase_labels_leaf() {
        let (st, stats) = label_nodes_by_phrase(&toy_tree(), &[phrase(&["great"], 1)]);
        assert_eq!(st.node_labels.get(&3), Some(&1));
        assert_eq!(stats.nodes_labeled, 1);
    }

    #[test]
    fn whole_sentence_phrase_labels_root() {
        let (st, _) =
            label_nodes_by_phrase(&toy_tree(), &[phrase(&["not", "a", "great", "movie"], 0)]);
        assert_eq!(st.root_label(), Some(0));
    }

    #[test]
    fn non_contiguous_span_never_matches() {
        // 1 and 3 hang off root 2: span of 2 is contiguous, but make a gap
        // tree where node 2's subtree is {1, 2} and node 4 heads {3, 4}… use
        // a crossing attachment instead: children of 3 are {1, 3}? Simplest:
        // token 2 heads 1 and 4, so span(2) = {1, 2, 4} with a hole at 3.
        let tree = DepTree::from_tokens(vec![
            DepToken::new(1, "x", 2, "dep"),
            DepToken::new(2, "y", 3, "dep"),
            DepToken::new(3, "z", 0, "root"),
            DepToken::new(4, "w", 2, "dep"),
        ])
        .unwrap();
        assert_eq!(tree.subtree_span(2), vec![1, 2, 4]); // hole at 3
        let (st, _) = label_nodes_by_phrase(&tree, &[phrase(&["x", "y", "w"], 1)]);
        assert!(st.node_labels.get(&2).is_none());
    }

    #[test]
    fn duplicate_phrase_takes_last_and_is_flagged() {
        let (st, stats) = label_nodes_by_phrase(
            &toy_tree(),
            &[phrase(&["great"], 0), phrase(&["great"], 1)],
        );
        assert_eq!(st.node_labels.get(&3), Some(&1));
        assert_eq!(stats.conflicting_phrases, 1);
    }

    #[test]
    fn sidecar_round_trip() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"tokens": ["great"], "label": 1}}"#).unwrap();
        writeln!(f, r#"{{"tokens": ["not", "great"], "label": 0}}"#).unwrap();
        let phrases = load_sentiment_sidecar(f.path()).unwrap();
        assert_eq!(phrases.len(), 2);
        assert_eq!(phrases[1].label, 0);
    }
}
