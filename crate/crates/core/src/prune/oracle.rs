use super::LayerId;
use crate::metrics::{MetricKind, MetricValue};
use std::sync::atomic::{AtomicUsize, Ordering};

/// Why an oracle could not produce a score at all.
///
/// A trial that ran but diverged is not an error: oracles report it as a
/// [`MetricValue::failed`] score so searches keep going. Errors are reserved
/// for conditions that make further scoring pointless (lost worker, corrupt
/// state, unknown task) and abort the search.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("session error: {0}")]
    Session(String),
    #[error("cannot record result: {0}")]
    Persist(String),
    #[error("interrupted")]
    Interrupted,
}

/// Scores a model that keeps only some of its layers, after fine-tuning it
/// on a task.
///
/// Implementations must be deterministic: the same kept set, task, seed and
/// fingerprint always yield the same value.
pub trait ScoreOracle: Sync {
    /// Stable identity of the oracle kind plus every hyperparameter that can
    /// change a score.
    fn fingerprint(&self) -> String;

    fn metric_kind(&self, task: &str) -> Result<MetricKind, OracleError>;

    /// `kept` is sorted ascending and never empty.
    fn score(&self, kept: &[LayerId], task: &str, seed: u64) -> Result<MetricValue, OracleError>;

    /// Scores several kept sets; results line up with the input. Schedulers
    /// override this to evaluate in parallel.
    fn score_many(
        &self,
        kept_sets: &[Vec<LayerId>],
        task: &str,
        seed: u64,
    ) -> Vec<Result<MetricValue, OracleError>> {
        kept_sets.iter().map(|k| self.score(k, task, seed)).collect()
    }
}

impl<T: ScoreOracle + ?Sized> ScoreOracle for &T {
    fn fingerprint(&self) -> String {
        (**self).fingerprint()
    }
    fn metric_kind(&self, task: &str) -> Result<MetricKind, OracleError> {
        (**self).metric_kind(task)
    }
    fn score(&self, kept: &[LayerId], task: &str, seed: u64) -> Result<MetricValue, OracleError> {
        (**self).score(kept, task, seed)
    }
    fn score_many(&self, kept_sets: &[Vec<LayerId>], task: &str, seed: u64) -> Vec<Result<MetricValue, OracleError>> {
        (**self).score_many(kept_sets, task, seed)
    }
}

/// Wraps an oracle and counts the kept sets it is asked to score.
pub struct CountingOracle<O> {
    inner: O,
    calls: AtomicUsize,
}

impl<O: ScoreOracle> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        Self { inner, calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn into_inner(self) -> O {
        self.inner
    }
}

impl<O: ScoreOracle> ScoreOracle for CountingOracle<O> {
    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    fn metric_kind(&self, task: &str) -> Result<MetricKind, OracleError> {
        self.inner.metric_kind(task)
    }

    fn score(&self, kept: &[LayerId], task: &str, seed: u64) -> Result<MetricValue, OracleError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.score(kept, task, seed)
    }

    fn score_many(&self, kept_sets: &[Vec<LayerId>], task: &str, seed: u64) -> Vec<Result<MetricValue, OracleError>> {
        self.calls.fetch_add(kept_sets.len(), Ordering::SeqCst);
        self.inner.score_many(kept_sets, task, seed)
    }
}
