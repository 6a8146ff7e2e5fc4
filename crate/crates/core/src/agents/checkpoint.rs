use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::agent::ObservationScale;
use super::config::{AgentConfig, AgentVariant};
use crate::neural::Network;
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Describes a checkpoint directory: one `member_<i>.json` per policy network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub variant: AgentVariant,
    pub config_hash: String,
    pub best_total_reward: f64,
    pub episode: usize,
    pub n_members: usize,
    pub observation_scale: ObservationScale,
    pub config: AgentConfig,
}

impl CheckpointManifest {
    pub fn new(
        config: &AgentConfig,
        observation_scale: ObservationScale,
        best_total_reward: f64,
        episode: usize,
    ) -> Self {
        Self {
            variant: config.variant,
            config_hash: config_hash(config),
            best_total_reward,
            episode,
            n_members: config.n_ensemble,
            observation_scale,
            config: config.clone(),
        }
    }
}

pub fn config_hash(config: &AgentConfig) -> String {
    let text = serde_json::to_string(config).expect("agent config serialises");
    hex::encode(&Sha256::digest(text.as_bytes())[..8])
}

fn member_file(i: usize) -> String {
    format!("member_{i}.json")
}

pub(super) fn write(dir: &Path, manifest: &CheckpointManifest, policies: &[&Network]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, net) in policies.iter().enumerate() {
        let path = dir.join(member_file(i));
        let text = serde_json::to_string(&net.to_checkpoint())?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(manifest)?).map_err(|e| Error::io(&path, e))
}

pub(super) fn read(dir: &Path) -> Result<(CheckpointManifest, Vec<Network>)> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: CheckpointManifest = serde_json::from_str(&text)?;
    if manifest.config_hash != config_hash(&manifest.config) {
        return Err(Error::Checkpoint(format!(
            "config hash mismatch in {}",
            path.display()
        )));
    }
    let nets = (0..manifest.n_members)
        .map(|i| Network::load(&dir.join(member_file(i)), i as u64).map_err(Error::from))
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, nets))
}
