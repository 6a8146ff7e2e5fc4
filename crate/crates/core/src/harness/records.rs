use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::StepInfo;
use crate::{Error, Result};

pub const HISTORY_HEADER: &str =
    "episode,total_reward,mean_call_to_arrival,mean_assign_to_arrival,total_calls,fraction_met,epsilon,wall_clock_s";
pub const EVAL_HEADER: &str =
    "episode,total_reward,mean_call_to_arrival,mean_assign_to_arrival,total_calls,fraction_met,wall_clock_s";

/// Outcome of one training episode or one test run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub episode: usize,
    pub total_reward: f64,
    pub mean_call_to_arrival: f64,
    pub mean_assign_to_arrival: f64,
    pub total_calls: usize,
    pub fraction_met: f64,
    pub epsilon: f64,
    pub wall_clock_s: f64,
}

#[derive(Serialize, Deserialize)]
struct EvalRow {
    episode: usize,
    total_reward: f64,
    mean_call_to_arrival: f64,
    mean_assign_to_arrival: f64,
    total_calls: usize,
    fraction_met: f64,
    wall_clock_s: f64,
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

impl RunRecord {
    pub fn from_episode(episode: usize, total_reward: f64, info: &StepInfo, epsilon: f64, wall_clock_s: f64) -> Self {
        Self {
            episode,
            total_reward,
            mean_call_to_arrival: mean(&info.call_to_arrival_times),
            mean_assign_to_arrival: mean(&info.assignment_to_arrival_times),
            total_calls: info.total_calls,
            fraction_met: info.fraction_demand_met,
            epsilon,
            wall_clock_s,
        }
    }
}

/// Row-at-a-time history writer; each row is flushed so an aborted run keeps its progress.
pub(crate) struct HistoryWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> HistoryWriter<W> {
    pub fn new(out: W) -> Self {
        Self {
            inner: csv::Writer::from_writer(out),
        }
    }

    pub fn write(&mut self, record: &RunRecord) -> Result<()> {
        self.inner.serialize(record)?;
        self.inner.flush().map_err(|e| Error::io("history", e))
    }
}

pub fn read_history(path: &Path) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub(crate) fn write_eval_csv<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(EvalRow {
            episode: r.episode,
            total_reward: r.total_reward,
            mean_call_to_arrival: r.mean_call_to_arrival,
            mean_assign_to_arrival: r.mean_assign_to_arrival,
            total_calls: r.total_calls,
            fraction_met: r.fraction_met,
            wall_clock_s: r.wall_clock_s,
        })?;
    }
    w.flush().map_err(|e| Error::io("eval.csv", e))
}

pub(crate) fn read_eval_csv<R: Read>(input: R) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize::<EvalRow>()
        .map(|row| {
            let row = row?;
            Ok(RunRecord {
                episode: row.episode,
                total_reward: row.total_reward,
                mean_call_to_arrival: row.mean_call_to_arrival,
                mean_assign_to_arrival: row.mean_assign_to_arrival,
                total_calls: row.total_calls,
                fraction_met: row.fraction_met,
                epsilon: 0.0,
                wall_clock_s: row.wall_clock_s,
            })
        })
        .collect()
}
