use super::{
    Algorithm, Candidate, LayerId, LayerTopology, OracleError, PruneError, PruneLedger, PruneSolution, ScoreOracle,
    StepRecord, SubsetScore,
};
use crate::metrics::MetricValue;
use std::cmp::Ordering;

/// Subsets per `score_many` batch during exhaustive search.
const OPTIMAL_BATCH: usize = 256;

/// Failed and NaN scores rank below everything else.
fn rank_key(score: f64) -> f64 {
    if score.is_nan() {
        f64::NEG_INFINITY
    } else {
        score
    }
}

fn compare_scores(a: f64, b: f64) -> Ordering {
    rank_key(a).total_cmp(&rank_key(b))
}

/// Removes the `n` highest layers, highest first. Task-independent.
pub fn top_layer_prune(topology: &LayerTopology, n: usize) -> Result<PruneSolution, PruneError> {
    topology.check_prune_count(n)?;
    let d = topology.depth();
    Ok(PruneSolution::new((d - n..d).rev().collect()))
}

/// A top-layer chain wrapped as a ledger so it can be stored and reported
/// alongside searched ones. No scores are recorded.
pub fn top_layer_ledger(
    topology: &LayerTopology,
    task: &str,
    n: usize,
    metric: crate::metrics::MetricKind,
    oracle_fingerprint: &str,
    seed: u64,
) -> Result<PruneLedger, PruneError> {
    let solution = top_layer_prune(topology, n)?;
    let mut ledger = PruneLedger::new(Algorithm::Top, *topology, task, metric, oracle_fingerprint, seed, n);
    ledger.steps = solution
        .pruned
        .iter()
        .enumerate()
        .map(|(i, &chosen)| StepRecord { step: i + 1, chosen, seed, candidates: Vec::new() })
        .collect();
    Ok(ledger)
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Lexicographic enumeration of the `n`-element subsets of `0..depth`, each
/// yielded sorted ascending.
#[derive(Debug, Clone)]
pub struct Subsets {
    depth: usize,
    current: Option<Vec<LayerId>>,
}

impl Iterator for Subsets {
    type Item = Vec<LayerId>;

    fn next(&mut self) -> Option<Vec<LayerId>> {
        let out = self.current.clone()?;
        let (d, k) = (self.depth, out.len());
        let mut next = out.clone();
        // rightmost position that can still be incremented
        match (0..k).rev().find(|&i| next[i] < d - k + i) {
            Some(i) => {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
            }
            None => self.current = None,
        }
        Some(out)
    }
}

pub fn enumerate_subsets(topology: &LayerTopology, n: usize) -> Result<Subsets, PruneError> {
    topology.check_prune_count(n)?;
    Ok(Subsets { depth: topology.depth(), current: Some((0..n).collect()) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalOutcome {
    /// Sorted descending.
    pub solution: PruneSolution,
    pub score: f64,
    /// Every subset tried, in enumeration order.
    pub table: Vec<SubsetScore>,
}

fn oracle_failure(topology: &LayerTopology, pruned: &[LayerId], source: OracleError) -> PruneError {
    PruneError::Oracle { kept: topology.kept_after(pruned), pruned: pruned.to_vec(), source }
}

/// Scores every `n`-subset and returns the best one.
pub fn optimal_search<O: ScoreOracle + ?Sized>(
    topology: &LayerTopology,
    task: &str,
    n: usize,
    oracle: &O,
    seed: u64,
) -> Result<OptimalOutcome, PruneError> {
    let subsets = enumerate_subsets(topology, n)?;
    let mut table: Vec<SubsetScore> = Vec::new();
    let mut best: Option<usize> = None;
    let all: Vec<Vec<LayerId>> = subsets.collect();
    for chunk in all.chunks(OPTIMAL_BATCH) {
        let kept: Vec<Vec<LayerId>> = chunk.iter().map(|p| topology.kept_after(p)).collect();
        let results = oracle.score_many(&kept, task, seed);
        for (pruned, result) in chunk.iter().zip(results) {
            let value = result.map_err(|e| oracle_failure(topology, pruned, e))?;
            let mut desc = pruned.clone();
            desc.reverse();
            table.push(SubsetScore { pruned: desc, score: value.value });
            let idx = table.len() - 1;
            best = match best {
                None => Some(idx),
                Some(b) => {
                    let ord = compare_scores(table[idx].score, table[b].score)
                        .then_with(|| table[idx].pruned.cmp(&table[b].pruned));
                    Some(if ord == Ordering::Greater { idx } else { b })
                }
            };
        }
    }
    let best = best.expect("at least one subset is always enumerated");
    Ok(OptimalOutcome {
        solution: PruneSolution::new(table[best].pruned.clone()),
        score: table[best].score,
        table,
    })
}

/// Runs greedy layer pruning for `n` steps from scratch.
pub fn glp_search<O: ScoreOracle + ?Sized>(
    topology: &LayerTopology,
    task: &str,
    n: usize,
    oracle: &O,
    seed: u64,
) -> Result<PruneLedger, PruneError> {
    topology.check_prune_count(n)?;
    let metric = oracle.metric_kind(task).map_err(|e| oracle_failure(topology, &[], e))?;
    let mut ledger = PruneLedger::new(Algorithm::Glp, *topology, task, metric, &oracle.fingerprint(), seed, n);
    glp_extend(&mut ledger, n, oracle, |_| Ok(()))?;
    Ok(ledger)
}

/// Continues a greedy ledger until it holds `target` steps.
///
/// `on_step` sees the ledger after every completed step; returning an error
/// stops the search. If the oracle fails, the ledger keeps every step that
/// completed before the failure, so the search can be resumed.
pub fn glp_extend<O, F>(ledger: &mut PruneLedger, target: usize, oracle: &O, mut on_step: F) -> Result<(), PruneError>
where
    O: ScoreOracle + ?Sized,
    F: FnMut(&PruneLedger) -> Result<(), PruneError>,
{
    if ledger.algorithm != Algorithm::Glp {
        return Err(PruneError::LedgerMismatch(format!("cannot extend a {} ledger greedily", ledger.algorithm)));
    }
    let fingerprint = oracle.fingerprint();
    if ledger.oracle_fingerprint != fingerprint {
        return Err(PruneError::LedgerMismatch(format!(
            "ledger was built with oracle {} but {} was supplied",
            ledger.oracle_fingerprint, fingerprint
        )));
    }
    let topology = ledger.topology()?;
    topology.check_prune_count(target)?;
    ledger.target = ledger.target.max(target);

    while ledger.steps.len() < target {
        let pruned = ledger.chain();
        let remaining = topology.kept_after(&pruned);
        let kept_sets: Vec<Vec<LayerId>> = remaining
            .iter()
            .map(|&c| remaining.iter().copied().filter(|&l| l != c).collect())
            .collect();
        let results = oracle.score_many(&kept_sets, &ledger.task, ledger.seed);

        let mut candidates = Vec::with_capacity(remaining.len());
        for (&layer, result) in remaining.iter().zip(results) {
            let value: MetricValue = result.map_err(|e| {
                let mut p = pruned.clone();
                p.push(layer);
                oracle_failure(&topology, &p, e)
            })?;
            candidates.push(Candidate { layer, score: value.value });
        }
        // ascending layer order, so `>=` lets the higher id win ties
        let chosen = candidates
            .iter()
            .fold(None::<&Candidate>, |best, c| match best {
                Some(b) if compare_scores(c.score, b.score) == Ordering::Less => Some(b),
                _ => Some(c),
            })
            .expect("a step always has at least two candidates")
            .layer;
        ledger.steps.push(StepRecord { step: ledger.steps.len() + 1, chosen, seed: ledger.seed, candidates });
        on_step(ledger)?;
    }
    Ok(())
}

/// The first `x` layers of a stored chain. Never evaluates anything.
pub fn lookup(ledger: &PruneLedger, x: usize) -> Result<PruneSolution, PruneError> {
    let n = ledger.n();
    if x > n {
        return Err(PruneError::OutOfRange { requested: x, available: n });
    }
    if ledger.algorithm == Algorithm::Optimal && x != 0 && x != n {
        return Err(PruneError::InvalidRequest(format!(
            "an optimal solution for {n} layers says nothing about {x}; run a separate optimal search"
        )));
    }
    let chain = match &ledger.optimal_pruned {
        Some(p) => p[..x].to_vec(),
        None => ledger.steps[..x].iter().map(|s| s.chosen).collect(),
    };
    Ok(PruneSolution::new(chain))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prune::synthetic::AdditiveOracle;
    use crate::prune::CountingOracle;

    fn topo(d: usize) -> LayerTopology {
        LayerTopology::new(d).unwrap()
    }

    #[test]
    fn top_layer_examples() {
        assert_eq!(top_layer_prune(&topo(12), 6).unwrap().pruned, vec![11, 10, 9, 8, 7, 6]);
        assert!(top_layer_prune(&topo(12), 0).unwrap().pruned.is_empty());
        assert_eq!(top_layer_prune(&topo(4), 2).unwrap().pruned, vec![3, 2]);
        assert!(matches!(top_layer_prune(&topo(4), 4), Err(PruneError::InvalidRequest(_))));
    }

    #[test]
    fn subset_counts_and_order() {
        assert_eq!(enumerate_subsets(&topo(12), 2).unwrap().count(), 66);
        assert_eq!(enumerate_subsets(&topo(12), 6).unwrap().count(), 924);
        assert_eq!(
            enumerate_subsets(&topo(3), 2).unwrap().collect::<Vec<_>>(),
            vec![vec![0, 1], vec![0, 2], vec![1, 2]]
        );
        assert_eq!(enumerate_subsets(&topo(3), 0).unwrap().collect::<Vec<_>>(), vec![Vec::<usize>::new()]);
        assert!(enumerate_subsets(&topo(3), 3).is_err());
        for d in 2..10 {
            for n in 0..d {
                let all: Vec<_> = enumerate_subsets(&topo(d), n).unwrap().collect();
                assert_eq!(all.len() as u128, binomial(d, n));
                assert!(all.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn optimal_on_additive_weights() {
        let o = CountingOracle::new(AdditiveOracle::new(vec![1.0, 1.0, 1.0, -5.0]));
        let out = optimal_search(&topo(4), "t", 1, &o, 0).unwrap();
        assert_eq!(out.solution.pruned, vec![3]);
        assert_eq!(o.calls(), 4);

        let o = CountingOracle::new(AdditiveOracle::new(vec![1.0; 4]));
        let out = optimal_search(&topo(4), "t", 0, &o, 0).unwrap();
        assert!(out.solution.pruned.is_empty());
        assert_eq!(o.calls(), 1);
    }

    #[test]
    fn optimal_ties_prefer_high_layers() {
        let o = AdditiveOracle::new(vec![0.0; 5]);
        assert_eq!(optimal_search(&topo(5), "t", 2, &o, 0).unwrap().solution.pruned, vec![4, 3]);
    }

    #[test]
    fn greedy_examples() {
        let o = CountingOracle::new(AdditiveOracle::new(vec![1.0, -3.0, 1.0, -2.0]));
        let ledger = glp_search(&topo(4), "t", 2, &o, 0).unwrap();
        assert_eq!(ledger.chain(), vec![1, 3]);
        assert_eq!(o.calls(), 4 + 3);
        ledger.validate().unwrap();

        let o = CountingOracle::new(AdditiveOracle::new(vec![0.5; 12]));
        let ledger = glp_search(&topo(12), "t", 2, &o, 0).unwrap();
        assert_eq!(o.calls(), 23);
        // flat landscape degrades to top-layer pruning
        assert_eq!(ledger.chain(), vec![11, 10]);
    }

    #[test]
    fn failed_candidates_lose_but_do_not_abort() {
        struct FailsOn(LayerId);
        impl ScoreOracle for FailsOn {
            fn fingerprint(&self) -> String {
                "fails".into()
            }
            fn metric_kind(&self, _: &str) -> Result<crate::metrics::MetricKind, OracleError> {
                Ok(crate::metrics::MetricKind::Synthetic)
            }
            fn score(&self, kept: &[LayerId], _: &str, _: u64) -> Result<MetricValue, OracleError> {
                let kind = crate::metrics::MetricKind::Synthetic;
                if !kept.contains(&self.0) {
                    Ok(MetricValue::failed(kind))
                } else {
                    Ok(MetricValue::new(kind, f64::NAN))
                }
            }
        }
        // every score is NaN or -inf: ties everywhere, so the highest id wins
        let ledger = glp_search(&topo(4), "t", 1, &FailsOn(3), 0).unwrap();
        assert_eq!(ledger.chain(), vec![3]);
        assert_eq!(ledger.steps[0].chosen_score(), Some(f64::NEG_INFINITY));
    }

    #[test]
    fn oracle_error_keeps_completed_steps() {
        struct Budget(std::sync::atomic::AtomicUsize);
        impl ScoreOracle for Budget {
            fn fingerprint(&self) -> String {
                "budget".into()
            }
            fn metric_kind(&self, _: &str) -> Result<crate::metrics::MetricKind, OracleError> {
                Ok(crate::metrics::MetricKind::Synthetic)
            }
            fn score(&self, kept: &[LayerId], _: &str, _: u64) -> Result<MetricValue, OracleError> {
                if self.0.fetch_sub(1, std::sync::atomic::Ordering::SeqCst) == 0 {
                    return Err(OracleError::Session("worker gone".into()));
                }
                Ok(MetricValue::new(crate::metrics::MetricKind::Synthetic, kept.iter().sum::<usize>() as f64))
            }
        }
        let o = Budget(std::sync::atomic::AtomicUsize::new(8));
        let mut ledger = PruneLedger::new(
            Algorithm::Glp,
            topo(5),
            "t",
            crate::metrics::MetricKind::Synthetic,
            "budget",
            0,
            3,
        );
        let err = glp_extend(&mut ledger, 3, &o, |_| Ok(())).unwrap_err();
        assert!(matches!(err, PruneError::Oracle { .. }));
        assert!(err.to_string().contains("keeps layers"));
        assert_eq!(ledger.steps.len(), 1);
    }

    #[test]
    fn extend_rejects_foreign_oracle() {
        let o = AdditiveOracle::new(vec![1.0, 2.0, 3.0]);
        let mut ledger = glp_search(&topo(3), "t", 1, &o, 0).unwrap();
        let other = AdditiveOracle::new(vec![3.0, 2.0, 1.0]);
        assert!(matches!(glp_extend(&mut ledger, 2, &other, |_| Ok(())), Err(PruneError::LedgerMismatch(_))));
    }

    #[test]
    fn lookup_prefixes() {
        let o = AdditiveOracle::new(vec![1.0, -3.0, 1.0, -2.0, 0.5, 4.0]);
        let ledger = glp_search(&topo(6), "t", 4, &o, 0).unwrap();
        let chain = ledger.chain();
        for x in 0..=4 {
            assert_eq!(lookup(&ledger, x).unwrap().pruned, chain[..x].to_vec());
        }
        let err = lookup(&ledger, 5).unwrap_err();
        assert!(matches!(err, PruneError::OutOfRange { requested: 5, available: 4 }));
        assert!(err.to_string().contains("extend the search"));
    }
}
