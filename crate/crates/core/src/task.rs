//! Labelled datasets a pruned model is fine-tuned and scored on.

use crate::metrics::MetricKind;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub tokens: Vec<u32>,
    /// Class id in `0..num_classes`.
    pub label: usize,
    /// Continuous target for rank-correlation tasks; equals `label` otherwise.
    pub target: f64,
}

/// A named dataset, its label space and the measure it is scored with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub metric: MetricKind,
    pub num_classes: usize,
    pub seq_len: usize,
    pub examples: Vec<Example>,
}

impl TaskSpec {
    pub fn labels(&self) -> Vec<usize> {
        self.examples.iter().map(|e| e.label).collect()
    }
}
