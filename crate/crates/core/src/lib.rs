//! Layer-wise pruning search for layered models.
//!
//! Given a model of depth `d`, a task and a performance measure, the engine
//! decides which encoder layers to drop before fine-tuning. It ships the
//! greedy, top-layer and exhaustive strategies ([`prune`]), the task metrics
//! they optimise ([`metrics`]), a small trainable transformer that serves as
//! a built-in scoring oracle ([`toy`]), a scheduler with a persistent result
//! cache and resumable ledgers ([`orchestrator`]), and a line-delimited wire
//! protocol for out-of-process evaluators ([`bridge`]).

pub mod bridge;
pub mod cli;
pub mod fingerprint;
pub mod metrics;
pub mod orchestrator;
pub mod prune;
pub mod task;
pub mod toy;
