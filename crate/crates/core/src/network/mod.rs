//! The iterative summarization network.
//!
//! Sentences are pooled from word embeddings with position weights, read
//! by a bidirectional GRU, and pooled into an initial document
//! representation. Each iteration then re-reads the sentences through
//! selective-reading cells whose update gates depend on the current
//! document representation, polishes that representation with a GRU step,
//! and decodes per-sentence features from it. A final MLP reads the
//! features of every iteration and emits one extraction probability per
//! sentence.

mod config;
pub mod layers;
mod model;
mod params;

pub use config::ItsConfig;
pub use model::{Diagnostics, ForwardPass, ItsModel, Mode, Prediction, ScoreVector};
pub use params::{
    build_layout, GateIds, GateMlpIds, GruIds, HeadIds, IterationIds, ItsParameters, Layout, ParamId, ParamKind,
    ParamSpec, WEIGHT_INIT_RANGE,
};
