//! Flat TOML run configuration: a scenario preset, a profile, and per-key overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{AgentConfig, AgentVariant, EnsembleActionMode, ExplorationSchedule};
use crate::env::{DispatchLayout, SimConfig};
use crate::harness::Profile;
use crate::{Error, Result};

pub const EFFECTIVE_CONFIG_FILE: &str = "effective_config.toml";
pub const DEFAULT_BASE_SEED: u64 = 42;
const EPSILON_START: f64 = 1.0;
const EPSILON_MIN: f64 = 0.02;

/// A named world configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: &'static str,
    pub description: &'static str,
    pub sim: SimConfig,
}

fn preset(name: &'static str, description: &'static str, areas: usize, ambulances: usize) -> Scenario {
    Scenario {
        name,
        description,
        sim: SimConfig {
            n_incident_areas: areas,
            n_ambulances: ambulances,
            ..SimConfig::default()
        },
    }
}

pub fn scenarios() -> Vec<Scenario> {
    vec![
        preset("scenario1", "one incident area at any time of day, three ambulances", 1, 3),
        preset("scenario2", "two incident areas at any time of day, six ambulances", 2, 6),
        preset("scenario3", "three incident areas at any time of day, nine ambulances", 3, 9),
    ]
}

pub fn scenario(name: &str) -> Result<Scenario> {
    scenarios().into_iter().find(|s| s.name == name).ok_or_else(|| {
        let known: Vec<_> = scenarios().iter().map(|s| s.name).collect();
        Error::Config(format!("unknown preset {name:?} (known: {})", known.join(", ")))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileName {
    Paper,
    Fast,
}

impl ProfileName {
    pub fn profile(self) -> Profile {
        match self {
            ProfileName::Paper => Profile::PAPER,
            ProfileName::Fast => Profile::FAST,
        }
    }
}

/// Every key a config file may set. Anything else is rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub preset: Option<String>,
    pub profile: Option<ProfileName>,
    pub agent: Option<AgentVariant>,
    pub base_seed: Option<u64>,
    pub train_episodes: Option<usize>,
    pub warmup_episodes: Option<usize>,
    pub test_runs: Option<usize>,

    pub world_size_km: Option<f64>,
    pub n_dispatch_points: Option<usize>,
    pub n_hospitals: Option<usize>,
    pub n_ambulances: Option<usize>,
    pub n_incident_areas: Option<usize>,
    pub n_epochs_per_day: Option<usize>,
    pub incidents_per_ambulance_per_day: Option<f64>,
    pub incident_jitter_km: Option<f64>,
    pub ambulance_speed_kph: Option<f64>,
    pub allocate_while_travelling: Option<bool>,
    pub episode_duration_days: Option<u32>,
    pub random_seed: Option<u64>,
    pub dispatch_layout: Option<DispatchLayout>,

    pub discount: Option<f64>,
    pub target_sync_interval_steps: Option<u64>,
    pub epsilon_start: Option<f64>,
    pub epsilon_min: Option<f64>,
    /// Derived from the training horizon when absent.
    pub epsilon_decay_per_episode: Option<f64>,
    pub ensemble_action_mode: Option<EnsembleActionMode>,
    pub reward_scale: Option<f64>,
    pub hidden_units: Option<Vec<usize>>,
    pub learning_rate: Option<f64>,
    pub adam_beta1: Option<f64>,
    pub adam_beta2: Option<f64>,
    pub adam_epsilon: Option<f64>,
    pub batch_size: Option<usize>,
    pub memory_capacity: Option<usize>,
    pub priority_alpha: Option<f64>,
    pub priority_beta_start: Option<f64>,
    pub priority_beta_end: Option<f64>,
    pub priority_epsilon: Option<f64>,
    pub grad_clip_norm: Option<f64>,
    /// Defaults to `base_seed`.
    pub agent_seed: Option<u64>,
}

/// Parse a TOML table into a [`ConfigFile`], naming the offending key on failure.
pub fn parse_table(table: toml::Table) -> Result<ConfigFile> {
    toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))
}

pub fn read_table(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(format!("{}: {}", path.display(), e.message())))?;
    if let Err(Error::Config(msg)) = parse_table(table.clone()) {
        return Err(Error::Config(format!("{}: {msg}", path.display())));
    }
    Ok(table)
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: String,
    pub profile: Profile,
    pub base_seed: u64,
    pub sim: SimConfig,
    pub agent: AgentConfig,
}

impl RunConfig {
    /// Layering: preset world, then profile counts and episode length, then explicit keys.
    pub fn resolve(file: &ConfigFile) -> Result<Self> {
        let (scenario_name, mut sim) = match &file.preset {
            Some(name) => (name.clone(), scenario(name)?.sim),
            None => ("custom".to_string(), SimConfig::default()),
        };
        let mut profile = file.profile.unwrap_or(ProfileName::Paper).profile();
        sim.episode_duration_days = profile.episode_days;

        macro_rules! set {
            ($target:expr, $($field:ident),+) => {
                $(if let Some(v) = file.$field.clone() { $target.$field = v; })+
            };
        }
        set!(profile, train_episodes, warmup_episodes, test_runs);
        set!(
            sim,
            world_size_km,
            n_dispatch_points,
            n_hospitals,
            n_ambulances,
            n_incident_areas,
            n_epochs_per_day,
            incidents_per_ambulance_per_day,
            incident_jitter_km,
            ambulance_speed_kph,
            allocate_while_travelling,
            episode_duration_days,
            random_seed,
            dispatch_layout
        );
        profile.episode_days = sim.episode_duration_days;
        sim.validate().map_err(|e| Error::Config(e.to_string()))?;
        if profile.warmup_episodes > profile.train_episodes {
            return Err(Error::Config(format!(
                "warmup_episodes ({}) exceeds train_episodes ({})",
                profile.warmup_episodes, profile.train_episodes
            )));
        }

        let base_seed = file.base_seed.unwrap_or(DEFAULT_BASE_SEED);
        let variant = file.agent.unwrap_or(AgentVariant::Ddqn);
        let mut exploration = ExplorationSchedule::for_horizon(
            profile.warmup_episodes,
            profile.train_episodes,
            file.epsilon_start.unwrap_or(EPSILON_START),
            file.epsilon_min.unwrap_or(EPSILON_MIN),
            variant.uses_epsilon(),
        );
        if let Some(d) = file.epsilon_decay_per_episode {
            exploration.epsilon_decay_per_episode = d;
        }
        let mut agent = AgentConfig::new(variant, exploration);
        set!(
            agent,
            discount,
            target_sync_interval_steps,
            ensemble_action_mode,
            reward_scale,
            hidden_units,
            batch_size,
            memory_capacity,
            priority_alpha,
            priority_beta_start,
            priority_beta_end,
            priority_epsilon
        );
        if let Some(lr) = file.learning_rate {
            agent.optimizer.learning_rate = lr;
        }
        if let Some(b) = file.adam_beta1 {
            agent.optimizer.beta1 = b;
        }
        if let Some(b) = file.adam_beta2 {
            agent.optimizer.beta2 = b;
        }
        if let Some(e) = file.adam_epsilon {
            agent.optimizer.epsilon = e;
        }
        agent.grad_clip_norm = file.grad_clip_norm;
        agent.seed = file.agent_seed.unwrap_or(base_seed);
        agent.validate().map_err(Error::Config)?;

        Ok(Self {
            scenario: scenario_name,
            profile,
            base_seed,
            sim,
            agent,
        })
    }

    /// Every resolved key spelled out; resolving it again gives back `self`.
    pub fn to_file(&self) -> ConfigFile {
        let s = &self.sim;
        let a = &self.agent;
        ConfigFile {
            preset: (self.scenario != "custom").then(|| self.scenario.clone()),
            profile: None,
            agent: Some(a.variant),
            base_seed: Some(self.base_seed),
            train_episodes: Some(self.profile.train_episodes),
            warmup_episodes: Some(self.profile.warmup_episodes),
            test_runs: Some(self.profile.test_runs),
            world_size_km: Some(s.world_size_km),
            n_dispatch_points: Some(s.n_dispatch_points),
            n_hospitals: Some(s.n_hospitals),
            n_ambulances: Some(s.n_ambulances),
            n_incident_areas: Some(s.n_incident_areas),
            n_epochs_per_day: Some(s.n_epochs_per_day),
            incidents_per_ambulance_per_day: Some(s.incidents_per_ambulance_per_day),
            incident_jitter_km: Some(s.incident_jitter_km),
            ambulance_speed_kph: Some(s.ambulance_speed_kph),
            allocate_while_travelling: Some(s.allocate_while_travelling),
            episode_duration_days: Some(s.episode_duration_days),
            random_seed: Some(s.random_seed),
            dispatch_layout: Some(s.dispatch_layout),
            discount: Some(a.discount),
            target_sync_interval_steps: Some(a.target_sync_interval_steps),
            epsilon_start: Some(a.exploration.epsilon_start),
            epsilon_min: Some(a.exploration.epsilon_min),
            epsilon_decay_per_episode: Some(a.exploration.epsilon_decay_per_episode),
            ensemble_action_mode: Some(a.ensemble_action_mode),
            reward_scale: Some(a.reward_scale),
            hidden_units: Some(a.hidden_units.clone()),
            learning_rate: Some(a.optimizer.learning_rate),
            adam_beta1: Some(a.optimizer.beta1),
            adam_beta2: Some(a.optimizer.beta2),
            adam_epsilon: Some(a.optimizer.epsilon),
            batch_size: Some(a.batch_size),
            memory_capacity: Some(a.memory_capacity),
            priority_alpha: Some(a.priority_alpha),
            priority_beta_start: Some(a.priority_beta_start),
            priority_beta_end: Some(a.priority_beta_end),
            priority_epsilon: Some(a.priority_epsilon),
            grad_clip_norm: a.grad_clip_norm,
            agent_seed: Some(a.seed),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_file()).expect("config serialises")
    }

    /// Short content hash of the effective config, used in run directory names.
    pub fn hash(&self) -> String {
        hex::encode(&Sha256::digest(self.to_toml().as_bytes())[..4])
    }

    pub fn read_effective(path: &Path) -> Result<Self> {
        Self::resolve(&parse_table(read_table(path)?)?)
    }

    pub fn write_effective(&self, dir: &Path) -> Result<()> {
        let path = dir.join(EFFECTIVE_CONFIG_FILE);
        std::fs::write(&path, self.to_toml()).map_err(|e| Error::io(&path, e))
    }
}
