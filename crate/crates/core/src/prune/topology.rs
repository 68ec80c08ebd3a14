use super::PruneError;
use serde::{Deserialize, Serialize};
use std::ops::Range;

pub type LayerId = usize;

/// The ordered layer set `0..depth` of a prunable model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerTopology {
    depth: usize,
}

impl LayerTopology {
    pub fn new(depth: usize) -> Result<Self, PruneError> {
        if depth < 2 {
            return Err(PruneError::InvalidRequest(format!("depth must be at least 2, got {depth}")));
        }
        Ok(Self { depth })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn layer_ids(&self) -> Range<LayerId> {
        0..self.depth
    }

    /// Rejects prune counts that would leave no layer.
    pub fn check_prune_count(&self, n: usize) -> Result<(), PruneError> {
        if n >= self.depth {
            return Err(PruneError::InvalidRequest(format!(
                "cannot prune {n} of {} layers: at least one layer must remain",
                self.depth
            )));
        }
        Ok(())
    }

    /// Layers that remain after removing `pruned`, ascending.
    pub fn kept_after(&self, pruned: &[LayerId]) -> Vec<LayerId> {
        let mut drop = vec![false; self.depth];
        for &l in pruned {
            drop[l] = true;
        }
        self.layer_ids().filter(|&l| !drop[l]).collect()
    }
}

/// Layers chosen for removal, in the order they were chosen.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PruneSolution {
    pub pruned: Vec<LayerId>,
}

impl PruneSolution {
    pub fn new(pruned: Vec<LayerId>) -> Self {
        Self { pruned }
    }

    pub fn n(&self) -> usize {
        self.pruned.len()
    }

    pub fn kept(&self, topology: &LayerTopology) -> Vec<LayerId> {
        topology.kept_after(&self.pruned)
    }
}
