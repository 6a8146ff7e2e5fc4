use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::evaluate::EvalReport;
use super::stats::{rank_sum_test, BoxStats};
use crate::{Error, Result};

/// Per-agent box statistics of mean call-to-arrival and the one-sided test against the baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub agent: String,
    pub call_to_arrival: BoxStats,
    /// Agent median minus baseline median; negative means faster responses.
    pub median_diff: f64,
    /// Mann-Whitney U of the agent's runs against the baseline's.
    pub u: f64,
    /// Probability of a U this small if agent and baseline were exchangeable.
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub scenario: String,
    pub baseline: String,
    pub n_runs: usize,
    pub rows: Vec<ComparisonRow>,
}

/// Compare evaluation reports run on one scenario with one seed list.
///
/// The baseline is the report named `random` if present, otherwise the first.
pub fn compare(reports: &[EvalReport]) -> Result<ComparisonTable> {
    if reports.len() < 2 {
        return Err(Error::Compare(format!("need at least two reports, got {}", reports.len())));
    }
    let first = &reports[0];
    for r in &reports[1..] {
        if r.scenario != first.scenario {
            return Err(Error::Compare(format!(
                "scenario mismatch: {} ran {}, {} ran {}",
                first.agent, first.scenario, r.agent, r.scenario
            )));
        }
        if r.seeds != first.seeds {
            return Err(Error::Compare(format!(
                "{} and {} were evaluated on different seeds",
                first.agent, r.agent
            )));
        }
    }
    let baseline = reports.iter().find(|r| r.agent == "random").unwrap_or(first);
    let base_values = baseline.call_to_arrival();
    let base_median = baseline.summary.call_to_arrival.median;
    let rows = reports
        .iter()
        .map(|r| {
            let test = rank_sum_test(&r.call_to_arrival(), &base_values);
            ComparisonRow {
                agent: r.agent.clone(),
                call_to_arrival: r.summary.call_to_arrival,
                median_diff: r.summary.call_to_arrival.median - base_median,
                u: test.u,
                p_value: test.p_less,
            }
        })
        .collect();
    Ok(ComparisonTable {
        scenario: first.scenario.clone(),
        baseline: baseline.agent.clone(),
        n_runs: first.seeds.len(),
        rows,
    })
}

impl ComparisonTable {
    pub fn row(&self, agent: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.agent == agent)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "agent", "min", "q1", "median", "q3", "max", "mean", "median_diff", "u", "p_value",
        ])?;
        for r in &self.rows {
            let b = &r.call_to_arrival;
            w.write_record([
                r.agent.clone(),
                b.min.to_string(),
                b.q1.to_string(),
                b.median.to_string(),
                b.q3.to_string(),
                b.max.to_string(),
                b.mean.to_string(),
                r.median_diff.to_string(),
                r.u.to_string(),
                r.p_value.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("comparison", e))
    }
}

impl fmt::Display for ComparisonTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "scenario {} ({} runs), mean call-to-arrival in minutes, baseline {}",
            self.scenario, self.n_runs, self.baseline
        )?;
        writeln!(
            f,
            "{:<24} {:>8} {:>8} {:>8} {:>8} {:>8} {:>9} {:>8}",
            "agent", "min", "q1", "median", "q3", "max", "vs base", "p"
        )?;
        for r in &self.rows {
            let b = &r.call_to_arrival;
            writeln!(
                f,
                "{:<24} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>+9.2} {:>8.4}",
                r.agent, b.min, b.q1, b.median, b.q3, b.max, r.median_diff, r.p_value
            )?;
        }
        Ok(())
    }
}
