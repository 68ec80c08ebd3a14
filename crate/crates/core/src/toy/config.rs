use super::ToyError;
use serde::{Deserialize, Serialize};

/// Shape of the toy encoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub depth: usize,
    pub width: usize,
    pub heads: usize,
    pub ffn: usize,
    pub vocab: usize,
    pub max_len: usize,
    pub classes: usize,
    pub dropout: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self { depth: 6, width: 32, heads: 2, ffn: 64, vocab: super::tasks::VOCAB, max_len: 32, classes: 2, dropout: 0.1 }
    }
}

impl ToyConfig {
    pub fn validate(&self) -> Result<(), ToyError> {
        let dims = [self.width, self.heads, self.ffn, self.vocab, self.max_len, self.classes];
        if dims.contains(&0) {
            return Err(ToyError::Config(format!("all dimensions must be positive: {self:?}")));
        }
        if !self.width.is_multiple_of(self.heads) {
            return Err(ToyError::Config(format!("width {} not divisible by {} heads", self.width, self.heads)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ToyError::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.width / self.heads
    }
}

/// Fine-tuning hyperparameters. The optimizer is AdamW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl TrainSpec {
    /// Settings used for full-size models: lr 2e-5, batch 32, 3 epochs.
    pub fn reference() -> Self {
        Self { lr: 2e-5, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.01, batch_size: 32, epochs: 3 }
    }

    /// Same roles with the learning rate scaled up for the toy model.
    pub fn toy() -> Self {
        Self { lr: 2e-3, ..Self::reference() }
    }

    pub fn validate(&self) -> Result<(), ToyError> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(ToyError::Config(format!("learning rate {} must be finite and non-negative", self.lr)));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(ToyError::Config("batch size and epochs must be positive".into()));
        }
        Ok(())
    }
}

impl Default for TrainSpec {
    fn default() -> Self {
        Self::toy()
    }
}
