//! Pre-trained word embedding table with deterministic OOV rows.

use super::TreebankError;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::borrow::Cow;
use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, BufReader};
use std::path::Path;

const OOV_RANGE: f64 = 0.05;

/// FNV-1a, so OOV rows do not depend on the process hasher.
fn fnv1a64(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// The row a word gets when it is absent from the embedding file:
/// uniform(−0.05, 0.05) from a stream seeded by the word itself, identical
/// across runs and platforms.
pub fn deterministic_oov_row(word: &str, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a64(word));
    (0..dim).map(|_| rng.random_range(-OOV_RANGE..OOV_RANGE)).collect()
}

/// Word → dense row map. Lookups are lowercased (the standard pre-trained
/// vocabularies are uncased); words never seen by the loader still resolve,
/// via the same deterministic OOV rule the loader uses.
#[derive(Clone, Debug)]
pub struct EmbeddingTable {
    dim: usize,
    oov_seed: u64,
    rows: HashMap<String, Vec<f64>>,
    /// Words from the requested vocabulary that were missing from the file.
    pub oov_count: usize,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_len(&self) -> usize {
        self.rows.len()
    }

    pub fn lookup(&self, form: &str) -> Cow<'_, [f64]> {
        let key = form.to_lowercase();
        match self.rows.get(&key) {
            Some(row) => Cow::Borrowed(row.as_slice()),
            None => Cow::Owned(deterministic_oov_row(&key, self.dim, self.oov_seed)),
        }
    }

    /// Table with no file-backed rows: every word resolves to its OOV row.
    /// Used for synthetic corpora and tests.
    pub fn synthetic(dim: usize, oov_seed: u64) -> Self {
        EmbeddingTable {
            dim,
            oov_seed,
            rows: HashMap::new(),
            oov_count: 0,
        }
    }

    pub fn insert(&mut self, word: &str, row: Vec<f64>) {
        assert_eq!(row.len(), self.dim);
        self.rows.insert(word.to_lowercase(), row);
    }
}

/// Scan a text embedding file ("word v1 … v_e" per line) for the given
/// vocabulary. Vocabulary words absent from the file get deterministic OOV
/// rows; `oov_count` reports how many.
pub fn load_embeddings(
    path: &Path,
    vocab: &BTreeSet<String>,
    dim: usize,
    oov_seed: u64,
) -> Result<EmbeddingTable, TreebankError> {
    let file = std::fs::File::open(path).map_err(|source| TreebankError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let wanted: BTreeSet<String> = vocab.iter().map(|w| w.to_lowercase()).collect();
    let mut rows: HashMap<String, Vec<f64>> = HashMap::new();

    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| TreebankError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        if !wanted.contains(word) {
            continue;
        }
        let values: Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
        let values = values.map_err(|e| TreebankError::BadRecord {
            line: lineno + 1,
            reason: format!("bad embedding value: {e}"),
        })?;
        if values.len() != dim {
            return Err(TreebankError::EmbeddingDim {
                line: lineno + 1,
                expected: dim,
                got: values.len(),
            });
        }
        rows.insert(word.to_string(), values);
    }

    let oov_count = wanted.iter().filter(|w| !rows.contains_key(*w)).count();
    for word in &wanted {
        if !rows.contains_key(word) {
            rows.insert(word.clone(), deterministic_oov_row(word, dim, oov_seed));
        }
    }
    Ok(EmbeddingTable {
        dim,
        oov_seed,
        rows,
        oov_count,
    })
}
