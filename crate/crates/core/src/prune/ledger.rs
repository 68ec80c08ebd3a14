use super::{LayerId, LayerTopology, PruneError, PruneSolution};
use crate::metrics::MetricKind;
use serde::{Deserialize, Serialize};
use std::fmt;

pub const LEDGER_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Glp,
    Top,
    Optimal,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Glp => "glp",
            Algorithm::Top => "top",
            Algorithm::Optimal => "optimal",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "glp" => Ok(Algorithm::Glp),
            "top" => Ok(Algorithm::Top),
            "optimal" => Ok(Algorithm::Optimal),
            other => Err(format!("unknown algorithm {other:?} (expected glp, top or optimal)")),
        }
    }
}

/// Scores are stored as plain numbers; failed evaluations (`-inf`) as `null`.
pub(crate) mod score_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub layer: LayerId,
    #[serde(with = "score_repr")]
    pub score: f64,
}

/// One greedy step: every remaining layer tried, the best one kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based.
    pub step: usize,
    pub chosen: LayerId,
    pub seed: u64,
    /// Sorted by layer id. Empty for top-layer steps, which score nothing.
    pub candidates: Vec<Candidate>,
}

impl StepRecord {
    pub fn chosen_score(&self) -> Option<f64> {
        self.candidates.iter().find(|c| c.layer == self.chosen).map(|c| c.score)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetScore {
    /// Sorted descending.
    pub pruned: Vec<LayerId>,
    #[serde(with = "score_repr")]
    pub score: f64,
}

/// Persistent result of a pruning search.
///
/// For `glp` and `top` the chosen layers of `steps` form the nested chain
/// `R_1 ⊂ … ⊂ R_k`. For `optimal`, `steps` is empty and the answer lives in
/// `optimal_pruned` together with the score of every subset tried.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneLedger {
    pub schema_version: u32,
    pub algorithm: Algorithm,
    pub depth: usize,
    pub task: String,
    pub metric: MetricKind,
    pub oracle_fingerprint: String,
    pub seed: u64,
    /// Number of layers the search was asked to prune.
    pub target: usize,
    pub steps: Vec<StepRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimal_pruned: Option<Vec<LayerId>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub subsets: Vec<SubsetScore>,
}

impl PruneLedger {
    pub fn new(
        algorithm: Algorithm,
        topology: LayerTopology,
        task: &str,
        metric: MetricKind,
        oracle_fingerprint: &str,
        seed: u64,
        target: usize,
    ) -> Self {
        Self {
            schema_version: LEDGER_SCHEMA_VERSION,
            algorithm,
            depth: topology.depth(),
            task: task.to_string(),
            metric,
            oracle_fingerprint: oracle_fingerprint.to_string(),
            seed,
            target,
            steps: Vec::new(),
            optimal_pruned: None,
            subsets: Vec::new(),
        }
    }

    pub fn topology(&self) -> Result<LayerTopology, PruneError> {
        LayerTopology::new(self.depth)
    }

    /// Pruned layers in the order they were chosen (descending for optimal).
    pub fn chain(&self) -> Vec<LayerId> {
        match &self.optimal_pruned {
            Some(p) => p.clone(),
            None => self.steps.iter().map(|s| s.chosen).collect(),
        }
    }

    /// Number of layers pruned so far.
    pub fn n(&self) -> usize {
        match &self.optimal_pruned {
            Some(p) => p.len(),
            None => self.steps.len(),
        }
    }

    pub fn is_complete(&self) -> bool {
        match self.algorithm {
            Algorithm::Optimal => self.optimal_pruned.is_some(),
            _ => self.steps.len() >= self.target,
        }
    }

    pub fn solution(&self) -> PruneSolution {
        PruneSolution::new(self.chain())
    }

    /// Checks the structural invariants of a ledger read from elsewhere.
    pub fn validate(&self) -> Result<(), PruneError> {
        let bad = |m: String| Err(PruneError::LedgerMismatch(m));
        self.topology()?;
        let chain = self.chain();
        if chain.len() >= self.depth {
            return bad(format!("chain of {} layers on depth {}", chain.len(), self.depth));
        }
        let mut seen = vec![false; self.depth];
        for &l in &chain {
            if l >= self.depth || seen[l] {
                return bad(format!("layer {l} out of range or repeated in chain {chain:?}"));
            }
            seen[l] = true;
        }
        for (i, s) in self.steps.iter().enumerate() {
            if s.step != i + 1 {
                return bad(format!("step {} stored at position {}", s.step, i + 1));
            }
            if self.algorithm == Algorithm::Glp {
                if s.candidates.len() != self.depth - i {
                    return bad(format!("step {} has {} candidates, expected {}", s.step, s.candidates.len(), self.depth - i));
                }
                if s.chosen_score().is_none() {
                    return bad(format!("step {} chose layer {} which is not a candidate", s.step, s.chosen));
                }
            }
        }
        if self.algorithm == Algorithm::Optimal && !self.steps.is_empty() {
            return bad("optimal ledger carries greedy steps".into());
        }
        Ok(())
    }
}
