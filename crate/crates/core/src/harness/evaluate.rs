use std::fs::File;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::records::{read_eval_csv, write_eval_csv, RunRecord};
use super::stats::BoxStats;
use crate::agents::Agent;
use crate::env::{DispatchEnv, StepInfo};
use crate::neural::NeuralError;
use crate::{Error, Result};

/// Offset separating test-run seeds from the training block `base_seed + episode`.
pub const EVAL_SEED_OFFSET: u64 = 1_000_000;

pub fn evaluation_seeds(base_seed: u64, n_runs: usize) -> Vec<u64> {
    (0..n_runs as u64)
        .map(|i| base_seed.wrapping_add(EVAL_SEED_OFFSET + i))
        .collect()
}

/// Run one greedy episode per seed on independent copies of `env`.
///
/// Records come back in seed order with `episode` numbered from 1. The agent
/// is only read, so nothing it holds (networks, memory) changes.
pub fn evaluate<E>(env: &E, agent: &Agent, seeds: &[u64], record_wall_clock: bool) -> Result<Vec<RunRecord>>
where
    E: DispatchEnv + Clone + Send + Sync,
{
    let scale = agent.scale();
    if scale.observation_len() != env.observation_len() || agent.n_actions() != env.n_actions() {
        return Err(NeuralError::ArchitectureMismatch(format!(
            "agent expects {} inputs and {} actions, environment has {} and {}",
            scale.observation_len(),
            agent.n_actions(),
            env.observation_len(),
            env.n_actions()
        ))
        .into());
    }
    seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| {
            let mut env = env.clone();
            // only consulted by the random agent
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_7e57);
            let start = Instant::now();
            let (total, info) = run_episode(&mut env, seed, |obs| agent.act_greedy(obs, &mut rng))?;
            let wall = if record_wall_clock {
                start.elapsed().as_secs_f64()
            } else {
                0.0
            };
            Ok(RunRecord::from_episode(i + 1, total, &info, 0.0, wall))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub n_runs: usize,
    pub call_to_arrival: BoxStats,
    pub assign_to_arrival: BoxStats,
    pub total_reward: BoxStats,
    pub fraction_met: BoxStats,
}

impl EvalSummary {
    pub fn from_records(records: &[RunRecord]) -> Option<Self> {
        if records.is_empty() {
            return None;
        }
        let col = |f: fn(&RunRecord) -> f64| BoxStats::from_values(&records.iter().map(f).collect::<Vec<_>>());
        Some(Self {
            n_runs: records.len(),
            call_to_arrival: col(|r| r.mean_call_to_arrival),
            assign_to_arrival: col(|r| r.mean_assign_to_arrival),
            total_reward: col(|r| r.total_reward),
            fraction_met: col(|r| r.fraction_met),
        })
    }
}

/// Test runs of one agent on one scenario, as written to `eval.csv` and `summary.json`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub agent: String,
    pub scenario: String,
    pub seeds: Vec<u64>,
    pub records: Vec<RunRecord>,
    pub summary: EvalSummary,
}

#[derive(Serialize, Deserialize)]
struct SummaryFile {
    agent: String,
    scenario: String,
    seeds: Vec<u64>,
    summary: EvalSummary,
}

impl EvalReport {
    pub fn new(agent: impl Into<String>, scenario: impl Into<String>, seeds: Vec<u64>, records: Vec<RunRecord>) -> Result<Self> {
        if seeds.len() != records.len() {
            return Err(Error::Compare(format!("{} seeds for {} records", seeds.len(), records.len())));
        }
        let summary = EvalSummary::from_records(&records)
            .ok_or_else(|| Error::Compare("evaluation produced no runs".into()))?;
        Ok(Self {
            agent: agent.into(),
            scenario: scenario.into(),
            seeds,
            records,
            summary,
        })
    }

    pub fn call_to_arrival(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.mean_call_to_arrival).collect()
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join("eval.csv");
        let f = File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        write_eval_csv(&self.records, f)?;
        let json_path = dir.join("summary.json");
        let f = File::create(&json_path).map_err(|e| Error::io(&json_path, e))?;
        serde_json::to_writer_pretty(
            f,
            &SummaryFile {
                agent: self.agent.clone(),
                scenario: self.scenario.clone(),
                seeds: self.seeds.clone(),
                summary: self.summary.clone(),
            },
        )?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let json_path = dir.join("summary.json");
        let f = File::open(&json_path).map_err(|e| Error::io(&json_path, e))?;
        let meta: SummaryFile = serde_json::from_reader(f)?;
        let csv_path = dir.join("eval.csv");
        let f = File::open(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        let records = read_eval_csv(f)?;
        Self::new(meta.agent, meta.scenario, meta.seeds, records)
    }
}

/// Sum rewards over one episode driven by `policy`; returns the total and final info.
pub(crate) fn run_episode<E, F>(env: &mut E, seed: u64, mut policy: F) -> Result<(f64, StepInfo)>
where
    E: DispatchEnv,
    F: FnMut(&[f64]) -> usize,
{
    let mut obs = env.reset(seed);
    let mut total = 0.0;
    loop {
        let r = env.step(policy(&obs.features))?;
        total += r.reward;
        if r.terminal || r.truncated {
            return Ok((total, r.info));
        }
        obs = r.observation;
    }
}
