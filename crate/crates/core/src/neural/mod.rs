//! Feed-forward value networks with exact backpropagation.
//!
//! Parameters live in one flat `Vec<f64>` so the optimiser, target-network
//! copies, checkpoints and finite-difference checks all work on a single
//! slice. Each layer records its offsets into that slice.

mod adam;
mod network;

use thiserror::Error;

pub use adam::{Adam, AdamConfig};
pub use network::{
    clip_global_norm, Architecture, Backward, Head, LayerKind, LayerSpec, Network,
    NetworkCheckpoint, NoiseMode, TrainingSample, CHECKPOINT_VERSION,
};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("expected input of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("architecture mismatch: {0}")]
    ArchitectureMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("empty training batch")]
    EmptyBatch,
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}
