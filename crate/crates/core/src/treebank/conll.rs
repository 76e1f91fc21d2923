//! Reduced-CoNLL reading and writing.
//!
//! The native profile is four tab-separated columns per token line — ID,
//! FORM, HEAD, DEPREL — with blank lines between sentences. Full ten-column
//! CoNLL-U is accepted by reading columns 1, 2, 7, 8; multiword ranges
//! (`1-2`) and empty nodes (`1.1`) are skipped, comment lines ignored. Lines
//! without tabs fall back to whitespace splitting so hand-written fixtures
//! stay readable.

use super::tree::{DepToken, DepTree};
use super::TreebankError;

pub fn parse_conll(text: &str) -> Result<Vec<DepTree>, TreebankError> {
    let mut trees = Vec::new();
    let mut block: Vec<DepToken> = Vec::new();
    let mut block_start_line = 0usize;

    let mut finish = |block: &mut Vec<DepToken>, start: usize| -> Result<(), TreebankError> {
        if block.is_empty() {
            return Ok(());
        }
        let tokens = std::mem::take(block);
        match DepTree::from_tokens(tokens) {
            Ok(tree) => {
                trees.push(tree);
                Ok(())
            }
            Err(e) => Err(TreebankError::BadTree {
                line: start,
                reason: e.to_string(),
            }),
        }
    };

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            finish(&mut block, block_start_line)?;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        if block.is_empty() {
            block_start_line = lineno;
        }
        let fields: Vec<&str> = if line.contains('\t') {
            line.split('\t').collect()
        } else {
            line.split_whitespace().collect()
        };
        let (id_s, form, head_s, deprel) = match fields.len() {
            4 => (fields[0], fields[1], fields[2], fields[3]),
            8..=10 => (fields[0], fields[1], fields[6], fields[7]),
            n => {
                return Err(TreebankError::MalformedLine {
                    line: lineno,
                    reason: format!("expected 4 or 10 columns, found {n}"),
                })
            }
        };
        // CoNLL-U multiword tokens and empty nodes carry no tree edges.
        if id_s.contains('-') || id_s.contains('.') {
            continue;
        }
        let index: usize = id_s.parse().map_err(|_| TreebankError::MalformedLine {
            line: lineno,
            reason: format!("token id {id_s:?} is not an integer"),
        })?;
        let head: usize = head_s.parse().map_err(|_| TreebankError::MalformedLine {
            line: lineno,
            reason: format!("head {head_s:?} is not an integer"),
        })?;
        block.push(DepToken::new(index, form, head, deprel));
    }
    finish(&mut block, block_start_line)?;
    Ok(trees)
}

/// Serialize trees in the four-column profile. `parse_conll ∘ to_conll` is
/// the identity on (index, form, head, deprel).
pub fn to_conll(trees: &[DepTree]) -> String {
    let mut out = String::new();
    for (i, tree) in trees.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for tok in &tree.tokens {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                tok.index, tok.form, tok.head, tok.deprel
            ));
        }
    }
    out
}
