//! A small trainable transformer encoder used as the built-in scoring
//! oracle.
//!
//! Everything runs in `f64` on the CPU. The pieces:
//!
//! * [`ToyTransformer`]: embeddings, post-LN encoder layers, mean pooling and
//!   a linear classifier, with hand-written backward passes.
//! * [`pretrain`]: masked-token pretraining that produces a [`Checkpoint`].
//! * [`fine_tune_and_score`]: drop layers, attach a fresh head, fine-tune,
//!   score on a held-out split.
//! * [`ToyOracle`]: the above behind the [`ScoreOracle`](crate::prune::ScoreOracle)
//!   interface.
//! * [`bench`]: forward latency per depth.

pub mod bench;
pub mod checkpoint;
mod config;
pub mod model;
mod optim;
pub mod params;
mod oracle;
pub mod tasks;
mod train;

pub use checkpoint::{Checkpoint, FIXTURE_D6};
pub use config::{ToyConfig, TrainSpec};
pub use model::{LmGrads, MaskedLm, ModelGrads, ToyTransformer};
pub use optim::AdamW;
pub use oracle::ToyOracle;
pub use params::Parameters;
pub use tasks::{make_synthetic_tasks, TASK_NAMES};
pub use train::{evaluate, fine_tune_and_score, pretrain, train_classifier, PretrainSpec, ToyScore};

use crate::metrics::MetricError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ToyError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("training diverged: loss {loss}, gradient norm {grad_norm}, layer norms {layer_norms:?}")]
    NonFinite { loss: f64, grad_norm: f64, layer_norms: Vec<(usize, f64)> },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}
