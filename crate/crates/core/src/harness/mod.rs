//! Training and evaluation protocol: fully random warm-up episodes, then
//! learning with best-checkpoint tracking, then independent greedy test runs
//! and per-agent comparison against the random baseline.

mod compare;
mod evaluate;
mod records;
mod stats;
mod train;

pub use compare::{compare, ComparisonRow, ComparisonTable};
pub use evaluate::{evaluate, evaluation_seeds, EvalReport, EvalSummary};
pub use records::{read_history, RunRecord, EVAL_HEADER, HISTORY_HEADER};
pub use stats::{quantile, rank_sum_test, BoxStats, RankSumResult};
pub use train::{train, Profile, TrainOutcome, TrainSchedule};
