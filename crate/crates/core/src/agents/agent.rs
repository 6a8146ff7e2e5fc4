use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::{self, CheckpointManifest};
use super::config::{AgentConfig, EnsembleActionMode};
use super::{argmax, majority_vote};
use crate::env::SimConfig;
use crate::neural::{
    clip_global_norm, Adam, Architecture, Head, Network, NeuralError, NoiseMode, TrainingSample,
};
use crate::replay::{ReplayMemory, SampleIndex, Transition};
use crate::{Error, Result};

/// Divisors that bring raw observations to roughly unit scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationScale {
    pub n_dispatch_points: usize,
    pub n_ambulances: usize,
    pub world_size_km: f64,
}

impl ObservationScale {
    pub fn from_config(cfg: &SimConfig) -> Self {
        Self {
            n_dispatch_points: cfg.n_dispatch_points,
            n_ambulances: cfg.n_ambulances,
            world_size_km: cfg.world_size_km,
        }
    }

    pub fn observation_len(&self) -> usize {
        self.n_dispatch_points + 3
    }

    /// Counts over fleet size, coordinates over world size; time of day unchanged.
    pub fn normalise(&self, raw: &[f64]) -> Vec<f64> {
        let n = self.n_dispatch_points;
        let mut out = Vec::with_capacity(raw.len());
        out.extend(raw[..n].iter().map(|c| c / self.n_ambulances as f64));
        out.push(raw[n] / self.world_size_km);
        out.push(raw[n + 1] / self.world_size_km);
        out.extend_from_slice(&raw[n + 2..]);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    /// Exploration on: epsilon for epsilon-greedy variants, fresh noise for noisy ones.
    Train,
    /// Deterministic: no epsilon, zero noise, majority vote across an ensemble.
    Greedy,
}

/// One ensemble member: policy and target network plus its own sampling stream.
#[derive(Debug, Clone)]
pub struct Member {
    pub policy: Network,
    pub target: Network,
    pub optimizer: Adam,
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LearnDiagnostics {
    pub loss: f64,
    pub mean_abs_td_error: f64,
    /// Memory held fewer transitions than one batch; nothing was updated.
    pub skipped: bool,
    pub optimizer_steps: usize,
    pub target_synced: bool,
}

#[derive(Debug, Clone)]
pub struct Agent {
    config: AgentConfig,
    scale: ObservationScale,
    members: Vec<Member>,
    memory: ReplayMemory,
    rng: ChaCha8Rng,
    epsilon: f64,
    beta: f64,
    learn_steps: u64,
    best_total_reward: Option<f64>,
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut x = seed ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ b.wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    x ^= x >> 33;
    x = x.wrapping_mul(0xff51_afd7_ed55_8ccd);
    x ^= x >> 33;
    x
}

impl Agent {
    pub fn new(config: AgentConfig, scale: ObservationScale) -> Result<Self> {
        config.validate().map_err(Error::Config)?;
        let arch = Architecture::new(
            scale.observation_len(),
            config.hidden_units.clone(),
            scale.n_dispatch_points,
            if config.variant.dueling() {
                Head::Dueling
            } else {
                Head::Plain
            },
            config.variant.noisy(),
        );
        let members = (0..config.n_ensemble as u64)
            .map(|i| {
                let policy = Network::new(arch.clone(), mix(config.seed, i, 1));
                let mut target = policy.clone();
                target.seed_noise(mix(config.seed, i, 2));
                target.resample_noise();
                Member {
                    optimizer: Adam::for_network(&policy, config.optimizer),
                    policy,
                    target,
                    rng: ChaCha8Rng::seed_from_u64(mix(config.seed, i, 3)),
                }
            })
            .collect();
        let memory = if config.variant.prioritized() {
            ReplayMemory::prioritized(
                config.memory_capacity,
                config.priority_alpha,
                config.priority_epsilon,
            )
        } else {
            ReplayMemory::uniform(config.memory_capacity)
        };
        Ok(Self {
            epsilon: config.exploration.epsilon_start,
            beta: config.priority_beta_start,
            rng: ChaCha8Rng::seed_from_u64(mix(config.seed, u64::MAX, 0)),
            config,
            scale,
            members,
            memory,
            learn_steps: 0,
            best_total_reward: None,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn scale(&self) -> &ObservationScale {
        &self.scale
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn members_mut(&mut self) -> &mut [Member] {
        &mut self.members
    }

    pub fn memory(&self) -> &ReplayMemory {
        &self.memory
    }

    pub fn memory_mut(&mut self) -> &mut ReplayMemory {
        &mut self.memory
    }

    pub fn learn_steps(&self) -> u64 {
        self.learn_steps
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn set_epsilon(&mut self, epsilon: f64) {
        self.epsilon = epsilon.clamp(0.0, 1.0);
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Anneal the importance-sampling exponent; `progress` runs 0..=1 over training.
    pub fn set_training_progress(&mut self, progress: f64) {
        let p = progress.clamp(0.0, 1.0);
        self.beta = self.config.priority_beta_start
            + (self.config.priority_beta_end - self.config.priority_beta_start) * p;
    }

    pub fn best_total_reward(&self) -> Option<f64> {
        self.best_total_reward
    }

    pub fn n_actions(&self) -> usize {
        self.scale.n_dispatch_points
    }

    pub fn random_action(&mut self) -> usize {
        self.rng.random_range(0..self.n_actions())
    }

    /// Store a transition; observations are normalised, the reward stays raw.
    pub fn remember(
        &mut self,
        observation: &[f64],
        action: usize,
        reward: f64,
        next_observation: &[f64],
        terminal: bool,
        truncated: bool,
    ) {
        self.memory.push(Transition {
            observation: self.scale.normalise(observation),
            action,
            reward,
            next_observation: self.scale.normalise(next_observation),
            terminal,
            truncated,
        });
    }

    pub fn select_action(&mut self, observation: &[f64], mode: ActionMode) -> usize {
        match mode {
            ActionMode::Greedy => match self.greedy_action(observation) {
                Some(a) => a,
                None => self.random_action(),
            },
            ActionMode::Train => self.act_train(observation),
        }
    }

    fn act_train(&mut self, observation: &[f64]) -> usize {
        if self.config.variant.is_random() {
            return self.random_action();
        }
        if self.config.exploration.uses_epsilon && self.rng.random::<f64>() < self.epsilon {
            return self.random_action();
        }
        let x = self.scale.normalise(observation);
        let mode = if self.config.variant.noisy() {
            NoiseMode::Resample
        } else {
            NoiseMode::Zero
        };
        let n = self.members.len();
        if n == 1 {
            return argmax(&forward(&mut self.members[0].policy, &x, mode));
        }
        match self.config.ensemble_action_mode {
            EnsembleActionMode::RandomMember => {
                let m = self.rng.random_range(0..n);
                argmax(&forward(&mut self.members[m].policy, &x, mode))
            }
            EnsembleActionMode::MajorityVote => {
                let votes: Vec<usize> = self
                    .members
                    .iter_mut()
                    .map(|m| argmax(&forward(&mut m.policy, &x, mode)))
                    .collect();
                majority_vote(&votes, self.n_actions())
            }
        }
    }

    /// Deterministic action for evaluation. Only the random variant uses `rng`.
    pub fn act_greedy<R: Rng + ?Sized>(&self, observation: &[f64], rng: &mut R) -> usize {
        match self.greedy_action(observation) {
            Some(a) => a,
            None => rng.random_range(0..self.n_actions()),
        }
    }

    /// Greedy action, or `None` for the random variant.
    pub fn greedy_action(&self, observation: &[f64]) -> Option<usize> {
        if self.members.is_empty() {
            return None;
        }
        let x = self.scale.normalise(observation);
        let votes: Vec<usize> = self
            .members
            .iter()
            .map(|m| argmax(&m.policy.infer(&x, false).expect("observation length checked")))
            .collect();
        Some(majority_vote(&votes, self.n_actions()))
    }

    /// Double-Q targets for member `member` on stored (normalised) transitions.
    pub fn compute_td_targets(&self, member: usize, batch: &[&Transition]) -> Vec<f64> {
        td_targets(
            &self.members[member],
            batch,
            self.config.discount,
            self.config.reward_scale,
            self.config.variant.noisy(),
        )
    }

    /// One optimiser step per ensemble member on a freshly sampled batch.
    pub fn learn_step(&mut self) -> Result<LearnDiagnostics> {
        let bs = self.config.batch_size;
        if self.members.is_empty() || self.memory.len() < bs {
            return Ok(LearnDiagnostics {
                skipped: true,
                ..Default::default()
            });
        }
        let variant = self.config.variant;
        let noisy = variant.noisy();
        let (gamma, scale, beta, clip) = (
            self.config.discount,
            self.config.reward_scale,
            self.beta,
            self.config.grad_clip_norm,
        );
        let mut diag = LearnDiagnostics::default();
        let Agent {
            members, memory, ..
        } = self;
        for member in members.iter_mut() {
            if noisy {
                member.policy.resample_noise();
                member.target.resample_noise();
            }
            let mut priority_update: Option<Vec<SampleIndex>> = None;
            let (batch, weights): (Vec<&Transition>, Vec<f64>) = if variant.prioritized() {
                let pb = memory.sample_prioritized(bs, beta, &mut member.rng)?;
                priority_update = Some(pb.indices);
                (pb.transitions, pb.weights)
            } else if variant.bagging() {
                (memory.sample_bootstrap(bs, &mut member.rng)?, vec![1.0; bs])
            } else {
                (memory.sample_uniform(bs, &mut member.rng)?, vec![1.0; bs])
            };
            let targets = td_targets(member, &batch, gamma, scale, noisy);
            let samples: Vec<TrainingSample<'_>> = batch
                .iter()
                .zip(&targets)
                .zip(&weights)
                .map(|((t, &target), &weight)| TrainingSample {
                    input: &t.observation,
                    action: t.action,
                    target,
                    weight,
                })
                .collect();
            let mut out = member.policy.backward_with(&samples, noisy)?;
            drop(samples);
            drop(batch);
            if let Some(max_norm) = clip {
                clip_global_norm(&mut out.grads, max_norm);
            }
            member.optimizer.step(&mut member.policy, &out.grads)?;
            if member.policy.params().iter().any(|p| !p.is_finite()) {
                return Err(NeuralError::NonFinite("policy parameters").into());
            }
            if let Some(indices) = priority_update {
                memory.update_priorities(&indices, &out.td_errors)?;
            }
            diag.loss += out.loss;
            diag.mean_abs_td_error +=
                out.td_errors.iter().map(|e| e.abs()).sum::<f64>() / out.td_errors.len() as f64;
            diag.optimizer_steps += 1;
        }
        let n = diag.optimizer_steps as f64;
        diag.loss /= n;
        diag.mean_abs_td_error /= n;

        self.learn_steps += 1;
        if self.learn_steps % self.config.target_sync_interval_steps == 0 {
            self.sync_targets();
            diag.target_synced = true;
        }
        Ok(diag)
    }

    pub fn sync_targets(&mut self) {
        for m in &mut self.members {
            m.target
                .copy_parameters_from(&m.policy)
                .expect("policy and target share an architecture");
        }
    }

    /// Checkpoint every policy network iff `total_reward` beats the best so far.
    pub fn save_best(&mut self, total_reward: f64, episode: usize, dir: &Path) -> Result<bool> {
        if self.best_total_reward.is_some_and(|best| total_reward <= best) {
            return Ok(false);
        }
        self.save_checkpoint(dir, total_reward, episode)?;
        self.best_total_reward = Some(total_reward);
        Ok(true)
    }

    pub fn save_checkpoint(&self, dir: &Path, total_reward: f64, episode: usize) -> Result<()> {
        let manifest = CheckpointManifest::new(&self.config, self.scale, total_reward, episode);
        let policies: Vec<&Network> = self.members.iter().map(|m| &m.policy).collect();
        checkpoint::write(dir, &manifest, &policies)
    }

    /// Rebuild an agent from a checkpoint directory; targets start as copies of the policies.
    pub fn load_checkpoint(dir: &Path) -> Result<(Self, CheckpointManifest)> {
        let (manifest, nets) = checkpoint::read(dir)?;
        let mut config = manifest.config.clone();
        // evaluation never samples the memory
        config.memory_capacity = 1;
        let mut agent = Agent::new(config, manifest.observation_scale)?;
        if nets.len() != agent.members.len() {
            return Err(Error::Checkpoint(format!(
                "manifest lists {} members, found {}",
                agent.members.len(),
                nets.len()
            )));
        }
        for (m, net) in agent.members.iter_mut().zip(nets) {
            m.policy.copy_parameters_from(&net)?;
            m.target.copy_parameters_from(&net)?;
        }
        agent.best_total_reward = Some(manifest.best_total_reward);
        Ok((agent, manifest))
    }
}

fn forward(net: &mut Network, x: &[f64], mode: NoiseMode) -> Vec<f64> {
    net.forward(x, mode).expect("observation length checked")
}

fn td_targets(
    member: &Member,
    batch: &[&Transition],
    gamma: f64,
    reward_scale: f64,
    use_noise: bool,
) -> Vec<f64> {
    batch
        .iter()
        .map(|t| {
            let r = t.reward / reward_scale;
            if (t.terminal && !t.truncated) || gamma == 0.0 {
                return r;
            }
            let next = &t.next_observation;
            let best = argmax(&member.policy.infer(next, use_noise).expect("stored length"));
            let value = member.target.infer(next, use_noise).expect("stored length")[best];
            r + gamma * value
        })
        .collect()
}
