//! Closed-form oracles for testing searches and for the CLI's `mock` oracle.

use super::{LayerId, OracleError, ScoreOracle};
use crate::fingerprint::digest;
use crate::metrics::{MetricKind, MetricValue};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn weight_bytes(ws: &[f64]) -> Vec<u8> {
    ws.iter().flat_map(|w| w.to_bits().to_le_bytes()).collect()
}

/// `score(kept) = Σ weights[i]` over kept layers, summed in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveOracle {
    weights: Vec<f64>,
}

impl AdditiveOracle {
    pub fn new(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    /// Weights drawn uniformly from `[-1, 1)`.
    pub fn random(depth: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::new((0..depth).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn value(&self, kept: &[LayerId]) -> f64 {
        kept.iter().map(|&l| self.weights[l]).sum()
    }
}

impl ScoreOracle for AdditiveOracle {
    fn fingerprint(&self) -> String {
        format!("additive-{}", digest(&[&weight_bytes(&self.weights)]))
    }

    fn metric_kind(&self, _task: &str) -> Result<MetricKind, OracleError> {
        Ok(MetricKind::Synthetic)
    }

    fn score(&self, kept: &[LayerId], _task: &str, _seed: u64) -> Result<MetricValue, OracleError> {
        if let Some(&bad) = kept.iter().find(|&&l| l >= self.weights.len()) {
            return Err(OracleError::Evaluation(format!("layer {bad} outside depth {}", self.weights.len())));
        }
        Ok(MetricValue::new(MetricKind::Synthetic, self.value(kept)))
    }
}

/// Additive scores plus pairwise interaction terms between kept layers, so
/// the best set for `n + 1` need not contain the best set for `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionOracle {
    base: f64,
    unary: Vec<f64>,
    /// Row-major `depth × depth`, only `i < j` entries used.
    pairwise: Vec<f64>,
}

impl InteractionOracle {
    /// Unary weights in `[0.5, 1.5)`, pairwise terms in `[-strength, strength)`.
    pub fn random(depth: usize, strength: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unary = (0..depth).map(|_| rng.gen_range(0.5..1.5)).collect();
        let pairwise = (0..depth * depth).map(|_| rng.gen_range(-strength..strength)).collect();
        Self { base: 1.0, unary, pairwise }
    }

    pub fn value(&self, kept: &[LayerId]) -> f64 {
        let d = self.unary.len();
        let mut s = self.base;
        for (a, &i) in kept.iter().enumerate() {
            s += self.unary[i];
            for &j in &kept[a + 1..] {
                s += self.pairwise[i * d + j];
            }
        }
        s
    }
}

impl ScoreOracle for InteractionOracle {
    fn fingerprint(&self) -> String {
        let bytes = [weight_bytes(&[self.base]), weight_bytes(&self.unary), weight_bytes(&self.pairwise)];
        format!("interaction-{}", digest(&[&bytes[0], &bytes[1], &bytes[2]]))
    }

    fn metric_kind(&self, _task: &str) -> Result<MetricKind, OracleError> {
        Ok(MetricKind::Synthetic)
    }

    fn score(&self, kept: &[LayerId], _task: &str, _seed: u64) -> Result<MetricValue, OracleError> {
        Ok(MetricValue::new(MetricKind::Synthetic, self.value(kept)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn additive_sums_kept() {
        let o = AdditiveOracle::new(vec![1.0, 2.0, 4.0]);
        assert_eq!(o.score(&[0, 2], "t", 0).unwrap().value, 5.0);
        assert!(o.score(&[3], "t", 0).is_err());
        assert_ne!(o.fingerprint(), AdditiveOracle::new(vec![1.0, 2.0, 4.5]).fingerprint());
    }

    #[test]
    fn interaction_is_deterministic() {
        let a = InteractionOracle::random(6, 0.2, 3);
        let b = InteractionOracle::random(6, 0.2, 3);
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.value(&[0, 3, 5]), b.value(&[0, 3, 5]));
    }
}
