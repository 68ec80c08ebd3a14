//! Evaluation scheduling, result caching, ledger persistence and reports.
//!
//! A [`Scheduler`] wraps an [`Evaluator`] (the thing that fine-tunes and
//! scores) with a [`ResultCache`] whose journal survives crashes, and runs
//! the candidates of a step in parallel. [`run_search`] drives a pruning
//! strategy on top of it and writes the ledger after every step, so a killed
//! search continues where it stopped and ends with the same bytes.

mod cache;
mod driver;
mod report;
mod request;
mod scheduler;
mod store;

pub use cache::{encode_record, replay, CacheError, Replay, ResultCache};
pub use driver::{resume, run_search, SearchPlan};
pub use report::{report, Report, ReportColumn};
pub use request::{EvalRequest, EvalResult, EvalStatus, Evaluation, Evaluator, OracleEvaluator};
pub use scheduler::Scheduler;
pub use store::{ledger_from_str, ledger_to_string, load_ledger, save_ledger};

use crate::metrics::MetricError;
use crate::prune::{OracleError, PruneError};

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error(transparent)]
    Prune(#[from] PruneError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("ledger: {0}")]
    Ledger(String),
    #[error("unsupported ledger schema version {found:?}; this build reads version {supported}")]
    Version { found: Option<u64>, supported: u32 },
    #[error("{0}")]
    Io(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}
