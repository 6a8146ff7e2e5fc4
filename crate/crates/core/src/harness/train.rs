use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::records::{HistoryWriter, RunRecord};
use crate::agents::{ActionMode, Agent};
use crate::env::DispatchEnv;
use crate::{Error, Result};

/// Episode length and counts for one training + testing protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Profile {
    pub episode_days: u32,
    pub train_episodes: usize,
    pub warmup_episodes: usize,
    pub test_runs: usize,
}

impl Profile {
    /// One-year episodes: 50 training years, the first 10 random, then 30 test years.
    pub const PAPER: Profile = Profile {
        episode_days: 365,
        train_episodes: 50,
        warmup_episodes: 10,
        test_runs: 30,
    };

    /// 30-day episodes, 15 training (5 random), 10 test runs.
    pub const FAST: Profile = Profile {
        episode_days: 30,
        train_episodes: 15,
        warmup_episodes: 5,
        test_runs: 10,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainSchedule {
    pub n_episodes: usize,
    pub warmup_episodes: usize,
    /// Episode `k` (1-based) resets the environment with `base_seed + k`.
    pub base_seed: u64,
    /// Write elapsed seconds into the history; off keeps reruns byte-identical.
    pub record_wall_clock: bool,
}

impl TrainSchedule {
    pub fn from_profile(profile: &Profile, base_seed: u64) -> Self {
        Self {
            n_episodes: profile.train_episodes,
            warmup_episodes: profile.warmup_episodes,
            base_seed,
            record_wall_clock: false,
        }
    }

    pub fn episode_seed(&self, episode: usize) -> u64 {
        self.base_seed.wrapping_add(episode as u64)
    }

    pub fn is_warmup(&self, episode: usize) -> bool {
        episode <= self.warmup_episodes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub history: Vec<RunRecord>,
    pub best_episode: Option<usize>,
    pub best_total_reward: Option<f64>,
    pub history_path: PathBuf,
    pub checkpoint_dir: PathBuf,
}

/// Train `agent` on `env`, writing `history.csv` and the best checkpoint under `out_dir`.
///
/// Warm-up episodes act uniformly at random and only fill the replay memory;
/// every later step is followed by one learn step. The policy networks are
/// checkpointed whenever a learning episode sets a new best total reward
/// (a random-variant agent never learns, so all its episodes are eligible).
/// `progress` sees each record right after it is written.
pub fn train<E: DispatchEnv>(
    env: &mut E,
    agent: &mut Agent,
    schedule: &TrainSchedule,
    out_dir: &Path,
    mut progress: impl FnMut(&RunRecord),
) -> Result<TrainOutcome> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let history_path = out_dir.join("history.csv");
    let checkpoint_dir = out_dir.join("checkpoint");
    let file = File::create(&history_path).map_err(|e| Error::io(&history_path, e))?;
    let mut writer = HistoryWriter::new(file);

    let exploration = agent.config().exploration;
    let always_random = agent.config().variant.is_random();
    let learning_episodes = schedule.n_episodes.saturating_sub(schedule.warmup_episodes).max(1);
    let mut history = Vec::with_capacity(schedule.n_episodes);
    let mut best_episode = None;

    for episode in 1..=schedule.n_episodes {
        let start = Instant::now();
        let warmup = schedule.is_warmup(episode);
        let epsilon = if warmup || always_random {
            1.0
        } else {
            exploration.epsilon(episode)
        };
        agent.set_epsilon(epsilon);
        if !warmup {
            let done = (episode - schedule.warmup_episodes - 1) as f64;
            agent.set_training_progress(done / learning_episodes as f64);
        }

        let mut obs = env.reset(schedule.episode_seed(episode));
        let mut total = 0.0;
        let info = loop {
            let action = if warmup {
                agent.random_action()
            } else {
                agent.select_action(&obs.features, ActionMode::Train)
            };
            let r = env.step(action)?;
            total += r.reward;
            agent.remember(
                &obs.features,
                action,
                r.reward,
                &r.observation.features,
                r.terminal,
                r.truncated,
            );
            if !warmup {
                agent.learn_step()?;
            }
            if r.terminal || r.truncated {
                break r.info;
            }
            obs = r.observation;
        };

        let wall = if schedule.record_wall_clock {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        };
        let record = RunRecord::from_episode(episode, total, &info, epsilon, wall);
        writer.write(&record)?;
        progress(&record);
        if (!warmup || always_random) && agent.save_best(total, episode, &checkpoint_dir)? {
            best_episode = Some(episode);
        }
        history.push(record);
    }

    Ok(TrainOutcome {
        history,
        best_episode,
        best_total_reward: agent.best_total_reward(),
        history_path,
        checkpoint_dir,
    })
}
