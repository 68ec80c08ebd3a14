use super::MetricError;
use crate::task::TaskSpec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// How the training data is divided into a fitting part and the held-out
/// part the performance measure is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub validation_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { validation_fraction: 0.15, seed: 0, stratified: true }
    }
}

/// Index sets into the task's examples. Both sides are sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    /// Set when stratification had to be abandoned.
    pub warning: Option<String>,
}

pub fn split_train_validation(task: &TaskSpec, spec: &SplitSpec) -> Result<Split, MetricError> {
    let labels: Vec<usize> = task.examples.iter().map(|e| e.label).collect();
    split_indices(&labels, spec)
}

/// Splits `labels.len()` items; validation receives `round(fraction * N)`.
/// In stratified mode that total is apportioned over classes by largest
/// remainder, so each class contributes within one item of
/// `fraction * class_size`. A class with a single member disables
/// stratification for the whole split.
pub fn split_indices(labels: &[usize], spec: &SplitSpec) -> Result<Split, MetricError> {
    let f = spec.validation_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(MetricError::InvalidSplit(format!("validation fraction {f} outside (0, 1)")));
    }
    if labels.is_empty() {
        return Err(MetricError::InvalidSplit("empty dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut warning = None;

    let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        classes.entry(l).or_default().push(i);
    }
    let stratify = if spec.stratified {
        if let Some((label, _)) = classes.iter().find(|(_, m)| m.len() < 2) {
            let msg = format!("class {label} has a single sample; falling back to an unstratified split");
            log::warn!("{msg}");
            warning = Some(msg);
            false
        } else {
            true
        }
    } else {
        false
    };

    let mut validation = Vec::new();
    if stratify {
        // per-class quotas by largest remainder so the total is round(f * N)
        let total = (f * labels.len() as f64).round() as usize;
        let exact: Vec<f64> = classes.values().map(|m| f * m.len() as f64).collect();
        let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let mut order: Vec<usize> = (0..exact.len()).collect();
        order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
        let mut short = total.saturating_sub(quota.iter().sum());
        for &c in order.iter().cycle().take(order.len() * 2) {
            if short == 0 {
                break;
            }
            if quota[c] < classes.values().nth(c).map_or(0, Vec::len) {
                quota[c] += 1;
                short -= 1;
            }
        }
        for (members, take) in classes.values_mut().zip(quota) {
            members.shuffle(&mut rng);
            validation.extend_from_slice(&members[..take]);
        }
    } else {
        let mut all: Vec<usize> = (0..labels.len()).collect();
        all.shuffle(&mut rng);
        let take = (f * labels.len() as f64).round() as usize;
        validation.extend_from_slice(&all[..take]);
    }
    validation.sort_unstable();
    let mut in_val = vec![false; labels.len()];
    for &i in &validation {
        in_val[i] = true;
    }
    let train: Vec<usize> = (0..labels.len()).filter(|&i| !in_val[i]).collect();
    if train.is_empty() || validation.is_empty() {
        return Err(MetricError::InvalidSplit(format!(
            "{} samples at fraction {f} leave an empty side",
            labels.len()
        )));
    }
    Ok(Split { train, validation, warning })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hundred_samples_split_85_15() {
        let labels: Vec<usize> = (0..100).map(|i| i % 2).collect();
        for stratified in [true, false] {
            let s = split_indices(&labels, &SplitSpec { stratified, ..Default::default() }).unwrap();
            assert_eq!((s.train.len(), s.validation.len()), (85, 15));
        }
    }

    #[test]
    fn same_seed_same_sets() {
        let labels: Vec<usize> = (0..57).map(|i| i % 3).collect();
        let spec = SplitSpec { seed: 99, ..Default::default() };
        assert_eq!(split_indices(&labels, &spec).unwrap(), split_indices(&labels, &spec).unwrap());
        let other = split_indices(&labels, &SplitSpec { seed: 100, ..spec }).unwrap();
        assert_ne!(other.validation, split_indices(&labels, &spec).unwrap().validation);
    }

    #[test]
    fn stratified_preserves_class_ratio() {
        let labels: Vec<usize> = (0..200).map(|i| usize::from(i % 5 == 0)).collect();
        let s = split_indices(&labels, &SplitSpec::default()).unwrap();
        let pos = s.validation.iter().filter(|&&i| labels[i] == 1).count();
        let neg = s.validation.len() - pos;
        // 40 positives, 160 negatives: 0.15 of each
        assert!((pos as i64 - 6).abs() <= 1);
        assert!((neg as i64 - 24).abs() <= 1);
    }

    #[test]
    fn singleton_class_falls_back() {
        let mut labels = vec![0; 20];
        labels.push(1);
        let s = split_indices(&labels, &SplitSpec::default()).unwrap();
        assert!(s.warning.is_some());
        assert_eq!(s.validation.len(), 3);
    }

    #[test]
    fn rejects_bad_fraction_and_empty() {
        assert!(split_indices(&[0, 1], &SplitSpec { validation_fraction: 1.0, ..Default::default() }).is_err());
        assert!(split_indices(&[], &SplitSpec::default()).is_err());
        assert!(split_indices(&[0, 0], &SplitSpec::default()).is_err());
    }

    proptest! {
        #[test]
        fn split_is_a_partition(
            labels in proptest::collection::vec(0usize..4, 10..300),
            seed in any::<u64>(),
            stratified in any::<bool>(),
            f in 0.05f64..0.5,
        ) {
            let spec = SplitSpec { validation_fraction: f, seed, stratified };
            let s = split_indices(&labels, &spec).unwrap();
            let mut seen = vec![0u8; labels.len()];
            for &i in s.train.iter().chain(&s.validation) {
                seen[i] += 1;
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            prop_assert_eq!(s, split_indices(&labels, &spec).unwrap());
        }
    }
}
