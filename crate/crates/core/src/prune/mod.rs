//! Layer-set algebra and the three layer-pruning strategies.
//!
//! A model of depth `d` has layers `0..d`, layer 0 nearest the input and
//! layer `d-1` just below the classifier. Every strategy answers the same
//! question: which `n` layers to remove so the remaining model scores best
//! after fine-tuning.
//!
//! * [`top_layer_prune`] removes the highest layers first and never looks at
//!   the task.
//! * [`optimal_search`] scores all `C(d, n)` subsets.
//! * [`glp_search`] grows the pruned set one layer at a time, each step
//!   keeping the candidate whose removal scores best. Its result is a chain
//!   `R_1 ⊂ R_2 ⊂ … ⊂ R_n`, so [`lookup`] can answer any smaller `x` without
//!   further evaluation.
//!
//! Ties between equal scores always go to the higher layer id (for subsets:
//! the lexicographically larger descending-sorted set). On a flat score
//! landscape greedy search therefore reproduces top-layer pruning.

pub(crate) mod ledger;
mod oracle;
mod search;
pub mod synthetic;
mod topology;

pub use ledger::{Algorithm, Candidate, PruneLedger, StepRecord, SubsetScore, LEDGER_SCHEMA_VERSION};
pub use oracle::{CountingOracle, OracleError, ScoreOracle};
pub use search::{
    binomial, enumerate_subsets, glp_extend, glp_search, lookup, optimal_search, top_layer_ledger,
    top_layer_prune, OptimalOutcome, Subsets,
};
pub use topology::{LayerId, LayerTopology, PruneSolution};

#[derive(Debug, thiserror::Error)]
pub enum PruneError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("x = {requested} exceeds the {available} pruning steps recorded; extend the search to at least {requested} steps")]
    OutOfRange { requested: usize, available: usize },
    #[error("oracle failed while scoring the model that keeps layers {kept:?} (pruned {pruned:?}): {source}")]
    Oracle {
        kept: Vec<LayerId>,
        pruned: Vec<LayerId>,
        #[source]
        source: OracleError,
    },
    #[error("ledger mismatch: {0}")]
    LedgerMismatch(String),
    #[error("persisting progress failed: {0}")]
    Persist(String),
}
