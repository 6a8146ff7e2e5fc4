//! Random assignment plus nine Deep-Q variants built from double-Q targets,
//! dueling heads, noisy layers, prioritized replay and 5-member bagging.

mod agent;
mod checkpoint;
mod config;

pub use agent::{ActionMode, Agent, LearnDiagnostics, Member, ObservationScale};
pub use checkpoint::{CheckpointManifest, MANIFEST_FILE};
pub use config::{
    AgentConfig, AgentVariant, EnsembleActionMode, ExplorationSchedule, BAGGING_ENSEMBLE_SIZE,
};

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Most frequent action; the lowest action index wins ties.
pub fn majority_vote(actions: &[usize], n_actions: usize) -> usize {
    let mut counts = vec![0usize; n_actions];
    for &a in actions {
        counts[a] += 1;
    }
    let mut best = 0;
    for (a, &c) in counts.iter().enumerate().skip(1) {
        if c > counts[best] {
            best = a;
        }
    }
    best
}
