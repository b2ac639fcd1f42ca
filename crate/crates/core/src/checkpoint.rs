//! Versioned JSON checkpoint: config, vocabulary, named parameter tensors
//! and, optionally, optimizer state for resuming.
//!
//! Floats are written in shortest round-trip form and parsed exactly, so a
//! save/load cycle reproduces every parameter bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{ItsConfig, ItsModel};
use crate::tensor::Tensor;
use crate::text::Vocabulary;
use crate::training::{Adam, TrainConfig};

pub const FORMAT: &str = "its-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingState {
    pub epochs_completed: usize,
    pub train_config: TrainConfig,
    pub optimizer: Adam,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: ItsModel,
    pub vocab: Vocabulary,
    pub training: Option<TrainingState>,
}

#[derive(Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    config: ItsConfig,
    vocabulary: Vocabulary,
    parameters: Vec<NamedTensor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    training: Option<TrainingState>,
}

impl Checkpoint {
    pub fn new(model: ItsModel, vocab: Vocabulary) -> Self {
        Checkpoint {
            model,
            vocab,
            training: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = CheckpointFile {
            format: FORMAT.into(),
            version: VERSION,
            config: self.model.config().clone(),
            vocabulary: self.vocab.clone(),
            parameters: self
                .model
                .named_params()
                .into_iter()
                .map(|(name, t)| NamedTensor {
                    name,
                    shape: t.shape().to_vec(),
                    data: t.to_vec(),
                })
                .collect(),
            training: self.training.clone(),
        };
        serde_json::to_string(&file).map_err(|e| Error::Data(format!("serializing checkpoint: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CheckpointFile =
            serde_json::from_str(text).map_err(|e| Error::Data(format!("malformed checkpoint: {e}")))?;
        if file.format != FORMAT {
            return Err(Error::Data(format!("not a checkpoint (format {:?})", file.format)));
        }
        if file.version != VERSION {
            return Err(Error::Data(format!("unsupported checkpoint version {}", file.version)));
        }
        if file.vocabulary.len() != file.config.vocab_size {
            return Err(Error::Data(format!(
                "checkpoint vocabulary has {} entries but config says {}",
                file.vocabulary.len(),
                file.config.vocab_size
            )));
        }
        let named = file
            .parameters
            .into_iter()
            .map(|p| Ok((p.name, Tensor::new(p.shape, p.data)?)))
            .collect::<Result<Vec<_>>>()?;
        let model = ItsModel::from_parts(file.config, named)?;
        if let Some(state) = &file.training {
            if !state.optimizer.matches(model.params().tensors()) {
                return Err(Error::Data(
                    "checkpoint optimizer state does not match parameters".into(),
                ));
            }
        }
        Ok(Checkpoint {
            model,
            vocab: file.vocabulary,
            training: file.training,
        })
    }

    /// Atomic write: temp file in the target directory, then rename.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_json()?.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_json(&text)
    }
}

/// Writes `bytes` to `path` through a temporary file renamed into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
