//! Corpus ingestion, vocabulary, embeddings and gold-label generation.

mod corpus;
mod embedding;
mod oracle;
mod vocab;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use corpus::{load_corpus, read_corpus, write_corpus, CorpusReader, Document};
pub use embedding::{load_embeddings, read_embeddings, EmbeddingMatrix, OOV_INIT_RANGE};
pub use oracle::{
    greedy_oracle_labels, greedy_oracle_labels_with, greedy_oracle_trace, subset_score, OracleObjective, OracleTrace,
    DEFAULT_MAX_SELECT,
};
pub use vocab::{Vocabulary, DEFAULT_CAPACITY, PAD, PAD_TOKEN, UNK, UNK_TOKEN};

pub const DEFAULT_MAX_WORDS: usize = 70;

/// Per-sentence 0/1 extraction targets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelVector(Vec<u8>);

impl LabelVector {
    pub fn new(bits: Vec<u8>) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        LabelVector(bits)
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count_selected(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.0
    }
}

/// Sentence-by-word token ids, every row exactly `max_words` long.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenGrid {
    rows: Vec<Vec<usize>>,
    max_words: usize,
}

impl TokenGrid {
    pub fn from_rows(rows: Vec<Vec<usize>>) -> Result<Self> {
        let max_words = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || max_words == 0 || rows.iter().any(|r| r.len() != max_words) {
            return Err(Error::InvalidArgument(
                "token grid rows must be non-empty and equal length".into(),
            ));
        }
        Ok(TokenGrid { rows, max_words })
    }

    pub fn num_sentences(&self) -> usize {
        self.rows.len()
    }

    pub fn max_words(&self) -> usize {
        self.max_words
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    /// Ids of sentence `i` with padding removed.
    pub fn words(&self, i: usize) -> Vec<usize> {
        self.rows[i].iter().copied().filter(|&id| id != PAD).collect()
    }
}

/// Maps each sentence to ids, truncating or right-padding to `max_words`.
pub fn tokenize_and_pad(doc: &Document, vocab: &Vocabulary, max_words: usize) -> Result<TokenGrid> {
    if max_words == 0 {
        return Err(Error::InvalidArgument("max_words must be at least 1".into()));
    }
    if doc.sentences.is_empty() {
        return Err(Error::Data(format!("document {:?} is empty", doc.id)));
    }
    let rows = doc
        .sentences
        .iter()
        .map(|sentence| {
            let mut ids: Vec<usize> = sentence.iter().take(max_words).map(|t| vocab.id(t)).collect();
            ids.resize(max_words, PAD);
            ids
        })
        .collect();
    Ok(TokenGrid { rows, max_words })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vocab() -> Vocabulary {
        Vocabulary::from_tokens(["<pad>", "<unk>", "a", "b"].iter().map(|s| s.to_string()).collect()).unwrap()
    }

    #[test]
    fn long_sentence_is_cut() {
        let sentence: Vec<String> = (0..72)
            .map(|i| if i % 2 == 0 { "a" } else { "b" }.to_string())
            .collect();
        let doc = Document::new("d", vec![sentence]);
        let grid = tokenize_and_pad(&doc, &vocab(), 70).unwrap();
        assert_eq!(grid.rows()[0].len(), 70);
        assert_eq!(&grid.rows()[0][..4], &[2, 3, 2, 3]);
    }

    #[test]
    fn short_sentence_is_padded() {
        let doc = Document::new("d", vec![vec!["a".into()]]);
        let grid = tokenize_and_pad(&doc, &vocab(), 3).unwrap();
        assert_eq!(grid.rows()[0], vec![2, PAD, PAD]);
    }

    #[test]
    fn unknown_token_maps_to_unk() {
        let doc = Document::new("d", vec![vec!["a".into(), "zebra".into()]]);
        let grid = tokenize_and_pad(&doc, &vocab(), 2).unwrap();
        assert_eq!(grid.rows()[0], vec![2, UNK]);
    }

    #[test]
    fn empty_document_errors() {
        let doc = Document::new("d", vec![]);
        assert!(tokenize_and_pad(&doc, &vocab(), 3).is_err());
    }

    proptest! {
        #[test]
        fn grid_shape_is_fixed(lens in proptest::collection::vec(1usize..90, 1..6), max_words in 1usize..80) {
            let doc = Document::new("d", lens.iter().map(|&n| vec!["a".to_string(); n]).collect());
            let grid = tokenize_and_pad(&doc, &vocab(), max_words).unwrap();
            prop_assert_eq!(grid.num_sentences(), lens.len());
            prop_assert!(grid.rows().iter().all(|r| r.len() == max_words));
        }
    }
}
