//! Performance measures used to score pruned models, and the aggregation
//! helpers used when reporting (validation splits, medians, relative scores).
//!
//! Every [`MetricValue`] is oriented so that larger is better; the validation
//! loss is therefore carried negated.

mod aggregate;
mod scores;
mod split;

pub use aggregate::{median_of_runs, relative_performance};
pub use scores::{accuracy, f1_binary, matthews_corr, spearman_corr};
pub use split::{split_indices, split_train_validation, Split, SplitSpec};

use serde::{Deserialize, Serialize};
use std::fmt;

/// Which performance measure a task is scored with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Accuracy,
    F1,
    #[serde(rename = "matthews")]
    MatthewsCorr,
    #[serde(rename = "spearman")]
    SpearmanCorr,
    /// Negated mean cross-entropy on the validation split. Only reachable
    /// through the loss-ablation switch.
    #[serde(rename = "neg_val_loss")]
    NegValidationLoss,
    /// Unbounded score produced by a synthetic (mock) oracle.
    Synthetic,
}

impl MetricKind {
    pub const ALL: [MetricKind; 6] = [
        MetricKind::Accuracy,
        MetricKind::F1,
        MetricKind::MatthewsCorr,
        MetricKind::SpearmanCorr,
        MetricKind::NegValidationLoss,
        MetricKind::Synthetic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Accuracy => "accuracy",
            MetricKind::F1 => "f1",
            MetricKind::MatthewsCorr => "matthews",
            MetricKind::SpearmanCorr => "spearman",
            MetricKind::NegValidationLoss => "neg_val_loss",
            MetricKind::Synthetic => "synthetic",
        }
    }

    /// Closed range a finite value of this kind must fall in, if bounded.
    pub fn bounds(self) -> Option<(f64, f64)> {
        match self {
            MetricKind::Accuracy | MetricKind::F1 => Some((0.0, 1.0)),
            MetricKind::MatthewsCorr | MetricKind::SpearmanCorr => Some((-1.0, 1.0)),
            MetricKind::NegValidationLoss => Some((f64::NEG_INFINITY, 0.0)),
            MetricKind::Synthetic => None,
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MetricKind {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| MetricError::UnknownKind(s.to_string()))
    }
}

/// A single score, higher is better.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub kind: MetricKind,
    pub value: f64,
}

impl MetricValue {
    pub fn new(kind: MetricKind, value: f64) -> Self {
        Self { kind, value }
    }

    /// Score given to a failed evaluation; loses every comparison.
    pub fn failed(kind: MetricKind) -> Self {
        Self { kind, value: f64::NEG_INFINITY }
    }

    pub fn is_failed(&self) -> bool {
        !self.value.is_finite()
    }

    /// Whether a finite value sits inside the range of its kind.
    pub fn in_range(&self) -> bool {
        match self.kind.bounds() {
            _ if self.is_failed() => true,
            Some((lo, hi)) => self.value >= lo - 1e-12 && self.value <= hi + 1e-12,
            None => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("length mismatch: {left} predictions vs {right} references")]
    LengthMismatch { left: usize, right: usize },
    #[error("metric needs at least {needed} samples, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("label {0} is not binary (expected 0 or 1)")]
    NonBinary(usize),
    #[error("correlation undefined: input has zero rank variance")]
    ConstantInput,
    #[error("relative performance undefined for a zero baseline")]
    ZeroBaseline,
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("unknown metric kind {0:?}")]
    UnknownKind(String),
}
