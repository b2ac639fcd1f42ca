use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::vocab::{Vocabulary, PAD};
use crate::error::{Error, Result};
use crate::tensor::{SeededRng, Tensor};

/// Half-width of the uniform range for tokens without a pretrained vector.
pub const OOV_INIT_RANGE: f64 = 0.2;

/// One row per vocabulary id; the PAD row is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    matrix: Tensor,
    /// Ids whose row came from the pretrained file.
    pretrained: Vec<usize>,
}

impl EmbeddingMatrix {
    /// Every row drawn from uniform[-0.2, 0.2] except PAD.
    pub fn random(vocab: &Vocabulary, width: usize, rng: &mut SeededRng) -> Result<Self> {
        Self::assemble(vocab, width, &mut |_| None, rng)
    }

    fn assemble(
        vocab: &Vocabulary,
        width: usize,
        lookup: &mut dyn FnMut(&str) -> Option<Vec<f64>>,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidArgument("embedding width must be positive".into()));
        }
        let mut data = Vec::with_capacity(vocab.len() * width);
        let mut pretrained = Vec::new();
        for (id, token) in vocab.tokens().iter().enumerate() {
            if id == PAD {
                data.extend(std::iter::repeat_n(0.0, width));
                continue;
            }
            match lookup(token) {
                Some(row) => {
                    pretrained.push(id);
                    data.extend(row);
                }
                None => data.extend((0..width).map(|_| rng.uniform(-OOV_INIT_RANGE, OOV_INIT_RANGE))),
            }
        }
        Ok(EmbeddingMatrix {
            matrix: Tensor::matrix(vocab.len(), width, data)?,
            pretrained,
        })
    }

    pub fn matrix(&self) -> &Tensor {
        &self.matrix
    }

    pub fn into_tensor(self) -> Tensor {
        self.matrix
    }

    pub fn width(&self) -> usize {
        self.matrix.cols()
    }

    pub fn pretrained_ids(&self) -> &[usize] {
        &self.pretrained
    }
}

/// Reads a whitespace-separated `token v_1 ... v_E` file.
///
/// Vocabulary tokens found in the file take the file vector; the rest are
/// drawn uniformly from [-0.2, 0.2]. Every line must carry `width` values.
pub fn load_embeddings(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    width: usize,
    rng: &mut SeededRng,
) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(BufReader::new(file), &path.display().to_string(), vocab, width, rng)
}

pub fn read_embeddings<R: BufRead>(
    reader: R,
    source: &str,
    vocab: &Vocabulary,
    width: usize,
    rng: &mut SeededRng,
) -> Result<EmbeddingMatrix> {
    let mut found: Vec<Option<Vec<f64>>> = vec![None; vocab.len()];
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::parse(source, line_no, e.to_string()))?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let values = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::parse(source, line_no, format!("bad number: {e}")))?;
        if values.len() != width {
            return Err(Error::parse(
                source,
                line_no,
                format!("expected {width} values, found {}", values.len()),
            ));
        }
        if let Some(id) = vocab.get(&token.to_lowercase()) {
            if id != PAD && found[id].is_none() {
                found[id] = Some(values);
            }
        }
    }
    EmbeddingMatrix::assemble(vocab, width, &mut |t| vocab.get(t).and_then(|id| found[id].take()), rng)
}
