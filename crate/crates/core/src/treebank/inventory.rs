//! The ordered set of typed dependencies used for one-hot relation encoding.

use serde::{Deserialize, Serialize};

/// Universal dependency relation labels, v1 inventory, plus six legacy
/// Stanford-dependency labels so both annotation styles resolve without
/// falling through to "unk". 46 named relations + the reserved "unk" slot
/// gives the 47-way encoding used throughout.
const UNIVERSAL_LABELS: [&str; 47] = [
    "acl",
    "advcl",
    "advmod",
    "amod",
    "appos",
    "aux",
    "auxpass",
    "case",
    "cc",
    "ccomp",
    "compound",
    "conj",
    "cop",
    "csubj",
    "csubjpass",
    "dep",
    "det",
    "discourse",
    "dislocated",
    "dobj",
    "expl",
    "foreign",
    "goeswith",
    "iobj",
    "list",
    "mark",
    "mwe",
    "name",
    "neg",
    "nmod",
    "nsubj",
    "nsubjpass",
    "nummod",
    "parataxis",
    "punct",
    "remnant",
    "reparandum",
    "root",
    "vocative",
    "xcomp",
    // legacy Stanford-dependency labels
    "acomp",
    "agent",
    "nn",
    "npadvmod",
    "pobj",
    "prep",
    "unk",
];

/// Ordered inventory of dependency-type labels; one-hot index = position.
/// Always contains "root" and a reserved "unk" slot. Subtyped labels such as
/// "nmod:poss" resolve to their base type; labels outside the inventory
/// resolve to "unk" rather than erroring.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationInventory {
    labels: Vec<String>,
}

impl RelationInventory {
    /// The default 47-type universal inventory.
    pub fn universal() -> Self {
        RelationInventory {
            labels: UNIVERSAL_LABELS.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Custom inventory (tests, ablations). "unk" and "root" are appended if
    /// absent so the reserved slots always exist.
    pub fn from_labels<I: IntoIterator<Item = S>, S: Into<String>>(labels: I) -> Self {
        let mut labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        for required in ["root", "unk"] {
            if !labels.iter().any(|l| l == required) {
                labels.push(required.to_string());
            }
        }
        RelationInventory { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn unk_index(&self) -> usize {
        self.exact_index("unk").expect("inventory always holds unk")
    }

    pub fn root_index(&self) -> usize {
        self.exact_index("root")
            .expect("inventory always holds root")
    }

    /// Exact lookup, no normalization or fallback.
    pub fn exact_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// One-hot index for a deprel as found in a treebank: subtypes truncate
    /// at ':' to their universal base type; anything still unknown maps to
    /// the reserved "unk" slot.
    pub fn index_of(&self, deprel: &str) -> usize {
        let base = deprel.split(':').next().unwrap_or(deprel);
        self.exact_index(base).unwrap_or_else(|| self.unk_index())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn universal_has_47_labels_with_reserved_slots() {
        let inv = RelationInventory::universal();
        assert_eq!(inv.len(), 47);
        assert!(inv.exact_index("root").is_some());
        assert!(inv.exact_index("unk").is_some());
        // no duplicates
        let mut sorted: Vec<&String> = inv.labels().iter().collect();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 47);
    }

    #[test]
    fn round_trip_index_label() {
        let inv = RelationInventory::universal();
        for j in 0..inv.len() {
            assert_eq!(inv.index_of(inv.label(j)), j);
        }
    }

    #[test]
    fn subtype_truncates_to_base() {
        let inv = RelationInventory::universal();
        assert_eq!(inv.index_of("nmod:poss"), inv.index_of("nmod"));
        assert_eq!(inv.index_of("acl:relcl"), inv.index_of("acl"));
    }

    #[test]
    fn unknown_label_maps_to_unk() {
        let inv = RelationInventory::universal();
        assert_eq!(inv.index_of("frobnicate"), inv.unk_index());
    }

    #[test]
    fn custom_inventory_gains_reserved_slots() {
        let inv = RelationInventory::from_labels(["nsubj", "dobj"]);
        assert_eq!(inv.len(), 4);
        assert_eq!(inv.index_of("nsubj"), 0);
        assert_eq!(inv.index_of("anything"), inv.unk_index());
    }
}
