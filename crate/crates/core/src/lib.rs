//! Iterative extractive summarization.
//!
//! The crate bundles a small reverse-mode autodiff engine ([`tensor`]), the
//! text pipeline and greedy label oracle ([`text`]), the network itself
//! ([`network`]), its training loop ([`training`]), ROUGE scoring
//! ([`rouge`]) and the experiment commands behind the `its` binary
//! ([`harness`]).

pub mod checkpoint;
pub mod error;
pub mod harness;
pub mod network;
pub mod rouge;
pub mod tensor;
pub mod text;
pub mod training;

pub use error::{Error, Result};
