use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::neural::AdamConfig;

/// The ten dispatch policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentVariant {
    #[serde(rename = "random")]
    Random,
    #[serde(rename = "ddqn")]
    Ddqn,
    #[serde(rename = "3dqn")]
    D3qn,
    #[serde(rename = "noisy_3dqn")]
    NoisyD3qn,
    #[serde(rename = "pr_3dqn")]
    PerD3qn,
    #[serde(rename = "pr_noisy_3dqn")]
    PerNoisyD3qn,
    #[serde(rename = "bagging_ddqn")]
    BaggingDdqn,
    #[serde(rename = "bagging_3dqn")]
    BaggingD3qn,
    #[serde(rename = "bagging_noisy_3dqn")]
    BaggingNoisyD3qn,
    #[serde(rename = "bagging_pr_noisy_3dqn")]
    BaggingPerNoisyD3qn,
}

pub const BAGGING_ENSEMBLE_SIZE: usize = 5;

impl AgentVariant {
    pub const ALL: [AgentVariant; 10] = [
        AgentVariant::Random,
        AgentVariant::Ddqn,
        AgentVariant::D3qn,
        AgentVariant::NoisyD3qn,
        AgentVariant::PerD3qn,
        AgentVariant::PerNoisyD3qn,
        AgentVariant::BaggingDdqn,
        AgentVariant::BaggingD3qn,
        AgentVariant::BaggingNoisyD3qn,
        AgentVariant::BaggingPerNoisyD3qn,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AgentVariant::Random => "random",
            AgentVariant::Ddqn => "ddqn",
            AgentVariant::D3qn => "3dqn",
            AgentVariant::NoisyD3qn => "noisy_3dqn",
            AgentVariant::PerD3qn => "pr_3dqn",
            AgentVariant::PerNoisyD3qn => "pr_noisy_3dqn",
            AgentVariant::BaggingDdqn => "bagging_ddqn",
            AgentVariant::BaggingD3qn => "bagging_3dqn",
            AgentVariant::BaggingNoisyD3qn => "bagging_noisy_3dqn",
            AgentVariant::BaggingPerNoisyD3qn => "bagging_pr_noisy_3dqn",
        }
    }

    pub fn is_random(&self) -> bool {
        *self == AgentVariant::Random
    }

    pub fn dueling(&self) -> bool {
        !matches!(
            self,
            AgentVariant::Random | AgentVariant::Ddqn | AgentVariant::BaggingDdqn
        )
    }

    pub fn noisy(&self) -> bool {
        matches!(
            self,
            AgentVariant::NoisyD3qn
                | AgentVariant::PerNoisyD3qn
                | AgentVariant::BaggingNoisyD3qn
                | AgentVariant::BaggingPerNoisyD3qn
        )
    }

    pub fn prioritized(&self) -> bool {
        matches!(
            self,
            AgentVariant::PerD3qn | AgentVariant::PerNoisyD3qn | AgentVariant::BaggingPerNoisyD3qn
        )
    }

    pub fn bagging(&self) -> bool {
        matches!(
            self,
            AgentVariant::BaggingDdqn
                | AgentVariant::BaggingD3qn
                | AgentVariant::BaggingNoisyD3qn
                | AgentVariant::BaggingPerNoisyD3qn
        )
    }

    pub fn ensemble_size(&self) -> usize {
        match self {
            AgentVariant::Random => 0,
            v if v.bagging() => BAGGING_ENSEMBLE_SIZE,
            _ => 1,
        }
    }

    /// Noisy and bagging variants explore through their networks instead of epsilon.
    pub fn uses_epsilon(&self) -> bool {
        !(self.is_random() || self.noisy() || self.bagging())
    }
}

impl fmt::Display for AgentVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AgentVariant::ALL
            .iter()
            .copied()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = AgentVariant::ALL.iter().map(|v| v.name()).collect();
                format!("unknown agent '{s}', expected one of: {}", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleActionMode {
    /// Act with one member chosen uniformly per decision.
    RandomMember,
    /// Act with the most common member argmax; ties go to the lowest action.
    MajorityVote,
}

/// Per-episode epsilon schedule with a fully random warm-up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorationSchedule {
    pub warmup_episodes: usize,
    pub epsilon_start: f64,
    pub epsilon_decay_per_episode: f64,
    pub epsilon_min: f64,
    pub uses_epsilon: bool,
}

impl ExplorationSchedule {
    /// Geometric decay that reaches `epsilon_min` on the last of `n_episodes`.
    pub fn for_horizon(
        warmup_episodes: usize,
        n_episodes: usize,
        epsilon_start: f64,
        epsilon_min: f64,
        uses_epsilon: bool,
    ) -> Self {
        let learning = n_episodes.saturating_sub(warmup_episodes);
        let decay = if learning == 0 || epsilon_start <= 0.0 {
            1.0
        } else {
            (epsilon_min / epsilon_start).powf(1.0 / learning as f64).min(1.0)
        };
        Self {
            warmup_episodes,
            epsilon_start,
            epsilon_decay_per_episode: decay,
            epsilon_min,
            uses_epsilon,
        }
    }

    /// Exploration rate for 1-based `episode`; warm-up episodes are fully random.
    pub fn epsilon(&self, episode: usize) -> f64 {
        if episode <= self.warmup_episodes {
            return 1.0;
        }
        if !self.uses_epsilon {
            return 0.0;
        }
        let k = (episode - self.warmup_episodes) as i32;
        let eps = self.epsilon_start * self.epsilon_decay_per_episode.powi(k);
        // powi can land a hair under the floor on the final episode
        if eps < self.epsilon_min * (1.0 + 1e-9) {
            self.epsilon_min
        } else {
            eps.min(1.0)
        }
    }

    pub fn is_warmup(&self, episode: usize) -> bool {
        episode <= self.warmup_episodes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub variant: AgentVariant,
    pub n_ensemble: usize,
    /// Learn steps between target-network copies.
    pub target_sync_interval_steps: u64,
    pub discount: f64,
    pub exploration: ExplorationSchedule,
    pub ensemble_action_mode: EnsembleActionMode,
    /// Raw rewards are divided by this before learning.
    pub reward_scale: f64,
    pub hidden_units: Vec<usize>,
    pub optimizer: AdamConfig,
    pub batch_size: usize,
    pub memory_capacity: usize,
    pub priority_alpha: f64,
    pub priority_beta_start: f64,
    pub priority_beta_end: f64,
    pub priority_epsilon: f64,
    pub grad_clip_norm: Option<f64>,
    pub seed: u64,
}

impl AgentConfig {
    pub fn new(variant: AgentVariant, exploration: ExplorationSchedule) -> Self {
        Self {
            variant,
            n_ensemble: variant.ensemble_size(),
            target_sync_interval_steps: 1000,
            discount: 0.99,
            exploration: ExplorationSchedule {
                uses_epsilon: variant.uses_epsilon(),
                ..exploration
            },
            ensemble_action_mode: EnsembleActionMode::RandomMember,
            reward_scale: 100.0,
            hidden_units: vec![128, 128],
            optimizer: AdamConfig::default(),
            batch_size: 64,
            memory_capacity: 100_000,
            priority_alpha: 0.6,
            priority_beta_start: 0.4,
            priority_beta_end: 1.0,
            priority_epsilon: 1e-5,
            grad_clip_norm: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n_ensemble != self.variant.ensemble_size() {
            return Err(format!(
                "{} needs n_ensemble = {}, got {}",
                self.variant,
                self.variant.ensemble_size(),
                self.n_ensemble
            ));
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(format!("discount must be in [0, 1], got {}", self.discount));
        }
        if !(self.reward_scale > 0.0) {
            return Err("reward_scale must be positive".into());
        }
        if self.target_sync_interval_steps == 0 {
            return Err("target_sync_interval_steps must be positive".into());
        }
        if self.batch_size == 0 || self.memory_capacity == 0 {
            return Err("batch_size and memory_capacity must be positive".into());
        }
        let e = &self.exploration;
        if !(0.0..=1.0).contains(&e.epsilon_start)
            || !(0.0..=1.0).contains(&e.epsilon_min)
            || e.epsilon_min > e.epsilon_start
            || !(0.0..=1.0).contains(&e.epsilon_decay_per_episode)
        {
            return Err("epsilon values must satisfy 0 <= min <= start <= 1, decay in [0, 1]".into());
        }
        if !(self.priority_epsilon > 0.0) || self.priority_alpha < 0.0 {
            return Err("priority_epsilon must be > 0 and priority_alpha >= 0".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for v in AgentVariant::ALL {
            assert_eq!(v.name().parse::<AgentVariant>().unwrap(), v);
        }
        assert!("dqn".parse::<AgentVariant>().is_err());
    }

    #[test]
    fn bagging_variants_have_five_members() {
        for v in AgentVariant::ALL {
            let n = v.ensemble_size();
            assert_eq!(n == 5, v.bagging(), "{v}");
        }
    }

    #[test]
    fn variant_components() {
        use AgentVariant::*;
        assert!(!Ddqn.dueling() && D3qn.dueling() && BaggingPerNoisyD3qn.dueling());
        assert!(PerNoisyD3qn.noisy() && PerNoisyD3qn.prioritized() && !PerNoisyD3qn.bagging());
        assert!(Ddqn.uses_epsilon() && PerD3qn.uses_epsilon());
        assert!(!NoisyD3qn.uses_epsilon() && !BaggingDdqn.uses_epsilon());
    }

    #[test]
    fn schedule_is_random_during_warmup_then_decays_to_floor() {
        let s = ExplorationSchedule::for_horizon(10, 50, 1.0, 0.02, true);
        for e in 1..=10 {
            assert_eq!(s.epsilon(e), 1.0);
        }
        let mut prev = 1.0;
        for e in 11..=50 {
            let eps = s.epsilon(e);
            assert!(eps <= prev && (0.0..=1.0).contains(&eps));
            prev = eps;
        }
        assert_eq!(s.epsilon(50), 0.02);
        assert_eq!(s.epsilon(80), 0.02);
    }

    #[test]
    fn networks_explore_without_epsilon_after_warmup() {
        let s = ExplorationSchedule::for_horizon(5, 15, 1.0, 0.02, false);
        assert_eq!(s.epsilon(5), 1.0);
        assert_eq!(s.epsilon(6), 0.0);
    }

    #[test]
    fn validation_catches_wrong_ensemble() {
        let s = ExplorationSchedule::for_horizon(1, 2, 1.0, 0.02, true);
        let mut c = AgentConfig::new(AgentVariant::BaggingD3qn, s);
        assert!(c.validate().is_ok());
        c.n_ensemble = 3;
        assert!(c.validate().is_err());
    }
}
