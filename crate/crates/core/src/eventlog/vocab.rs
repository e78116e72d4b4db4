use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Bidirectional map between categorical labels and dense indices.
///
/// Index [`Vocabulary::PAD`] is reserved for padding and [`Vocabulary::UNK`]
/// for values never seen while the vocabulary was fitted. Real labels start
/// at [`Vocabulary::FIRST`] in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    labels: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub const PAD: u32 = 0;
    pub const UNK: u32 = 1;
    pub const FIRST: u32 = 2;

    pub fn new() -> Self {
        Self::default()
    }

    pub fn fit<'a>(labels: impl IntoIterator<Item = &'a str>) -> Self {
        let mut vocab = Self::new();
        for label in labels {
            vocab.insert(label);
        }
        vocab
    }

    /// Returns the index of `label`, adding it if absent.
    pub fn insert(&mut self, label: &str) -> u32 {
        if let Some(&idx) = self.index.get(label) {
            return idx;
        }
        let idx = Self::FIRST + self.labels.len() as u32;
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), idx);
        idx
    }

    /// Index of `label`, or [`Vocabulary::UNK`] when unseen.
    pub fn lookup(&self, label: &str) -> u32 {
        self.get(label).unwrap_or(Self::UNK)
    }

    pub fn get(&self, label: &str) -> Option<u32> {
        self.index.get(label).copied()
    }

    pub fn label(&self, idx: u32) -> Option<&str> {
        idx.checked_sub(Self::FIRST)
            .and_then(|i| self.labels.get(i as usize))
            .map(String::as_str)
    }

    /// Number of real labels (reserved indices excluded).
    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    /// Size of the index space including the reserved indices.
    pub fn index_space(&self) -> usize {
        self.labels.len() + Self::FIRST as usize
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Hex SHA-256 over the ordered label list.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for label in &self.labels {
            hasher.update((label.len() as u64).to_le_bytes());
            hasher.update(label.as_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

impl From<Vec<String>> for Vocabulary {
    fn from(labels: Vec<String>) -> Self {
        Self::fit(labels.iter().map(String::as_str))
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(vocab: Vocabulary) -> Self {
        vocab.labels
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reserved_indices_come_first() {
        let v = Vocabulary::fit(["a", "b", "a"]);
        assert_eq!(v.get("a"), Some(2));
        assert_eq!(v.get("b"), Some(3));
        assert_eq!(v.lookup("zzz"), Vocabulary::UNK);
        assert_eq!(v.index_space(), 4);
        assert_eq!(v.label(Vocabulary::PAD), None);
    }

    #[test]
    fn json_is_a_plain_label_list() {
        let v = Vocabulary::fit(["x", "y"]);
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"["x","y"]"#);
        let back: Vocabulary = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.fingerprint(), v.fingerprint());
    }

    proptest! {
        #[test]
        fn index_label_round_trip(labels in proptest::collection::vec("[a-z]{1,4}", 0..30)) {
            let v = Vocabulary::fit(labels.iter().map(String::as_str));
            for l in &labels {
                let idx = v.get(l).unwrap();
                prop_assert_eq!(v.label(idx), Some(l.as_str()));
                prop_assert_eq!(v.lookup(v.label(idx).unwrap()), idx);
            }
        }
    }
}
