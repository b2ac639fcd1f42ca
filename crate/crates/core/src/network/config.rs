use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture hyperparameters of the iterative summarizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItsConfig {
    /// Number of polishing iterations K.
    pub iterations: usize,
    pub hidden: usize,
    pub embedding: usize,
    /// Hidden width of the selective-reading gate MLP.
    pub gate_hidden: usize,
    /// Hidden width of the labeling MLP.
    pub label_hidden: usize,
    pub max_words: usize,
    pub vocab_size: usize,
    /// Dropout keep probability used in training mode.
    pub keep_prob: f64,
    pub use_selective_reading: bool,
    pub use_concat_labeling: bool,
    pub tie_iteration_params: bool,
}

impl Default for ItsConfig {
    fn default() -> Self {
        ItsConfig {
            iterations: 5,
            hidden: 200,
            embedding: 100,
            gate_hidden: 200,
            label_hidden: 200,
            max_words: 70,
            vocab_size: 100_000,
            keep_prob: 0.7,
            use_selective_reading: true,
            use_concat_labeling: true,
            tie_iteration_params: false,
        }
    }
}

impl ItsConfig {
    /// Small widths for tests and desk-scale experiments.
    pub fn tiny(vocab_size: usize) -> Self {
        ItsConfig {
            iterations: 2,
            hidden: 8,
            embedding: 8,
            gate_hidden: 8,
            label_hidden: 8,
            max_words: 12,
            vocab_size,
            keep_prob: 1.0,
            ..ItsConfig::default()
        }
    }

    /// Sets `hidden` and the two MLP widths that default to it.
    pub fn with_hidden(mut self, hidden: usize) -> Self {
        self.hidden = hidden;
        self.gate_hidden = hidden;
        self.label_hidden = hidden;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let widths = [
            ("iterations", self.iterations),
            ("hidden", self.hidden),
            ("embedding", self.embedding),
            ("gate_hidden", self.gate_hidden),
            ("label_hidden", self.label_hidden),
            ("max_words", self.max_words),
            ("vocab_size", self.vocab_size),
        ];
        if let Some((name, _)) = widths.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return Err(Error::Config(format!(
                "keep_prob must lie in (0, 1], got {}",
                self.keep_prob
            )));
        }
        Ok(())
    }

    /// Number of distinct per-iteration parameter blocks.
    pub fn parameter_blocks(&self) -> usize {
        if self.tie_iteration_params {
            1
        } else {
            self.iterations
        }
    }

    /// Input width of the labeling MLP.
    pub fn label_input(&self) -> usize {
        if self.use_concat_labeling {
            self.iterations * self.hidden
        } else {
            self.hidden
        }
    }

    /// Total scalar parameter count, in closed form.
    pub fn parameter_count(&self) -> usize {
        let (e, h, f, m) = (self.embedding, self.hidden, self.gate_hidden, self.label_hidden);
        let gru = |input: usize, gates: usize| gates * (h * input + h * h + h);
        let embedding = self.vocab_size * e;
        let context = 2 * gru(e, 3);
        let document = h * 2 * h + h;
        let selective = if self.use_selective_reading {
            2 * gru(h, 2) + (f * 3 * h + f) + (h * f + h)
        } else {
            2 * gru(h, 3)
        };
        let block = selective + gru(h, 3) + 2 * gru(h, 3);
        let head = m * self.label_input() + m + m + 1;
        embedding + context + document + self.parameter_blocks() * block + head
    }
}
