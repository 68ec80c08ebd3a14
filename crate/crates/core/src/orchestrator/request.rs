use crate::fingerprint;
use crate::metrics::{MetricKind, MetricValue};
use crate::prune::{LayerId, OracleError, ScoreOracle};
use serde::{Deserialize, Serialize};
use std::time::Duration;

/// One fine-tune-and-score job.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EvalRequest {
    pub task: String,
    /// Sorted ascending, never empty.
    pub kept: Vec<LayerId>,
    pub seed: u64,
    pub oracle: String,
    pub hparams: String,
}

impl EvalRequest {
    /// Canonical serialization; identical requests always share a key.
    pub fn key(&self) -> String {
        serde_json::to_string(self).expect("requests serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalStatus {
    Ok,
    Failed,
}

/// Outcome of an [`EvalRequest`], as journaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub request: EvalRequest,
    pub status: EvalStatus,
    pub metric: MetricKind,
    #[serde(with = "crate::prune::ledger::score_repr")]
    pub score: f64,
    pub val_loss: Option<f64>,
    pub wall_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl EvalResult {
    pub fn new(request: EvalRequest, eval: Evaluation, wall_seconds: f64) -> Self {
        let ok = eval.metric.value.is_finite();
        Self {
            request,
            status: if ok { EvalStatus::Ok } else { EvalStatus::Failed },
            metric: eval.metric.kind,
            score: if ok { eval.metric.value } else { f64::NEG_INFINITY },
            val_loss: eval.val_loss.filter(|v| v.is_finite()),
            wall_seconds,
            detail: eval.detail,
        }
    }

    pub fn value(&self) -> MetricValue {
        MetricValue::new(self.metric, self.score)
    }
}

/// What an evaluator reports for one request.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub metric: MetricValue,
    pub val_loss: Option<f64>,
    pub detail: Option<String>,
}

impl From<MetricValue> for Evaluation {
    fn from(metric: MetricValue) -> Self {
        Self { metric, val_loss: None, detail: None }
    }
}

/// Backend that actually runs evaluations for the scheduler.
pub trait Evaluator: Sync {
    fn fingerprint(&self) -> String;

    /// Canonical text of the hyperparameters; hashed into every request.
    fn hyperparameters(&self) -> String {
        String::new()
    }

    fn metric_kind(&self, task: &str) -> Result<MetricKind, OracleError>;

    fn evaluate(&self, request: &EvalRequest) -> Result<Evaluation, OracleError>;
}

impl<T: Evaluator + ?Sized> Evaluator for &T {
    fn fingerprint(&self) -> String {
        (**self).fingerprint()
    }
    fn hyperparameters(&self) -> String {
        (**self).hyperparameters()
    }
    fn metric_kind(&self, task: &str) -> Result<MetricKind, OracleError> {
        (**self).metric_kind(task)
    }
    fn evaluate(&self, request: &EvalRequest) -> Result<Evaluation, OracleError> {
        (**self).evaluate(request)
    }
}

/// Adapts a plain [`ScoreOracle`], optionally sleeping before each score to
/// stand in for a slow fine-tune.
pub struct OracleEvaluator<O> {
    oracle: O,
    delay: Duration,
}

impl<O: ScoreOracle> OracleEvaluator<O> {
    pub fn new(oracle: O) -> Self {
        Self { oracle, delay: Duration::ZERO }
    }

    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }

    pub fn oracle(&self) -> &O {
        &self.oracle
    }
}

impl<O: ScoreOracle> Evaluator for OracleEvaluator<O> {
    fn fingerprint(&self) -> String {
        self.oracle.fingerprint()
    }

    fn metric_kind(&self, task: &str) -> Result<MetricKind, OracleError> {
        self.oracle.metric_kind(task)
    }

    fn evaluate(&self, request: &EvalRequest) -> Result<Evaluation, OracleError> {
        if !self.delay.is_zero() {
            std::thread::sleep(self.delay);
        }
        self.oracle.score(&request.kept, &request.task, request.seed).map(Evaluation::from)
    }
}

pub(crate) fn hparams_hash(text: &str) -> String {
    fingerprint::digest_str(&[text])
}
