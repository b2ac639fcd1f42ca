//! Marker-token corpus: every document hides one sentence containing
//! [`MARKER`], and that sentence is the whole highlight.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::SeededRng;
use crate::text::Document;

pub const MARKER: &str = "marker";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub documents: usize,
    pub min_sentences: usize,
    pub max_sentences: usize,
    pub min_words: usize,
    pub max_words: usize,
    pub filler_vocab: usize,
    /// Smallest index the marker sentence may take.
    pub marker_min_index: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            documents: 32,
            min_sentences: 5,
            max_sentences: 8,
            min_words: 4,
            max_words: 8,
            filler_vocab: 40,
            marker_min_index: 3,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_sentences == 0 || self.min_sentences > self.max_sentences {
            return Err(Error::Config("sentence count range is empty".into()));
        }
        if self.min_words < 2 || self.min_words > self.max_words {
            return Err(Error::Config("sentence length range must start at 2 or more".into()));
        }
        if self.marker_min_index >= self.min_sentences {
            return Err(Error::Config(format!(
                "marker_min_index {} leaves no room in a {}-sentence document",
                self.marker_min_index, self.min_sentences
            )));
        }
        if self.filler_vocab == 0 {
            return Err(Error::Config("filler_vocab must be positive".into()));
        }
        Ok(())
    }
}

pub fn filler_word(i: usize) -> String {
    format!("w{i:02}")
}

/// Index of the marker sentence, if any.
pub fn marker_index(doc: &Document) -> Option<usize> {
    doc.sentences.iter().position(|s| s.iter().any(|w| w == MARKER))
}

pub fn generate(config: &SynthConfig) -> Result<Vec<Document>> {
    config.validate()?;
    let mut rng = SeededRng::new(config.seed);
    let mut docs = Vec::with_capacity(config.documents);
    for d in 0..config.documents {
        let n_s = config.min_sentences + rng.below(config.max_sentences - config.min_sentences + 1);
        let marker_at = config.marker_min_index + rng.below(n_s - config.marker_min_index);
        let mut sentences = Vec::with_capacity(n_s);
        for i in 0..n_s {
            let len = config.min_words + rng.below(config.max_words - config.min_words + 1);
            let mut words: Vec<String> = (0..len).map(|_| filler_word(rng.below(config.filler_vocab))).collect();
            if i == marker_at {
                let slot = rng.below(len);
                words[slot] = MARKER.to_string();
            }
            sentences.push(words);
        }
        let highlight = sentences[marker_at].clone();
        docs.push(Document::new(format!("synth-{d:04}"), sentences).with_highlights(vec![highlight]));
    }
    Ok(docs)
}
