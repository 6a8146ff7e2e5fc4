//! Transition memory: uniform ring buffer, prioritized sum-tree variant and
//! bootstrap sampling for ensemble members.

mod memory;
mod sum_tree;

use thiserror::Error;

pub use memory::{PrioritizedBatch, ReplayMemory, SampleIndex, Transition};
pub use sum_tree::SumTree;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplayError {
    #[error("cannot sample {requested} transitions from an empty memory")]
    Empty { requested: usize },
    #[error("memory was not created with prioritized replay")]
    NotPrioritized,
}
