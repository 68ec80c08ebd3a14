use super::request::Evaluator;
use super::scheduler::Scheduler;
use super::store::{load_ledger, save_ledger};
use super::OrchestratorError;
use crate::prune::{
    glp_extend, optimal_search, top_layer_ledger, Algorithm, LayerTopology, PruneError, PruneLedger, ScoreOracle,
};
use std::path::Path;

/// What to search for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchPlan {
    pub algorithm: Algorithm,
    pub task: String,
    pub depth: usize,
    pub n: usize,
    pub seed: u64,
}

impl SearchPlan {
    fn check_matches(&self, ledger: &PruneLedger, fingerprint: &str) -> Result<(), OrchestratorError> {
        let mut diffs = Vec::new();
        if ledger.algorithm != self.algorithm {
            diffs.push(format!("algorithm {} vs {}", ledger.algorithm, self.algorithm));
        }
        if ledger.task != self.task {
            diffs.push(format!("task {:?} vs {:?}", ledger.task, self.task));
        }
        if ledger.depth != self.depth {
            diffs.push(format!("depth {} vs {}", ledger.depth, self.depth));
        }
        if ledger.seed != self.seed {
            diffs.push(format!("seed {} vs {}", ledger.seed, self.seed));
        }
        if ledger.oracle_fingerprint != fingerprint {
            diffs.push(format!("oracle {} vs {}", ledger.oracle_fingerprint, fingerprint));
        }
        if self.algorithm == Algorithm::Optimal && ledger.target != self.n {
            diffs.push(format!("optimal n {} vs {}", ledger.target, self.n));
        }
        if diffs.is_empty() {
            Ok(())
        } else {
            Err(OrchestratorError::Prune(PruneError::LedgerMismatch(format!(
                "existing ledger was built for a different search ({}); choose another output path",
                diffs.join(", ")
            ))))
        }
    }
}

/// Runs (or continues) a search, persisting the ledger to `ledger_path`
/// after every greedy step. An existing ledger at that path is resumed if
/// it describes the same search; a greedy ledger is extended when `n`
/// exceeds its length.
pub fn run_search<E: Evaluator>(
    scheduler: &Scheduler<E>,
    plan: &SearchPlan,
    ledger_path: Option<&Path>,
) -> Result<PruneLedger, OrchestratorError> {
    let topology = LayerTopology::new(plan.depth)?;
    topology.check_prune_count(plan.n)?;
    let fingerprint = scheduler.fingerprint();
    let existing = match ledger_path {
        Some(p) if p.exists() => {
            let ledger = load_ledger(p)?;
            plan.check_matches(&ledger, &fingerprint)?;
            Some(ledger)
        }
        _ => None,
    };
    let save = |ledger: &PruneLedger| -> Result<(), PruneError> {
        match ledger_path {
            Some(p) => save_ledger(p, ledger).map_err(|e| PruneError::Persist(e.to_string())),
            None => Ok(()),
        }
    };

    let ledger = match plan.algorithm {
        Algorithm::Top => {
            let metric = scheduler.metric_kind(&plan.task)?;
            let ledger = top_layer_ledger(&topology, &plan.task, plan.n, metric, &fingerprint, plan.seed)?;
            if existing.as_ref() != Some(&ledger) {
                save(&ledger)?;
            }
            ledger
        }
        Algorithm::Glp => {
            let mut ledger = match existing {
                Some(l) => l,
                None => {
                    let metric = scheduler.metric_kind(&plan.task)?;
                    let l = PruneLedger::new(Algorithm::Glp, topology, &plan.task, metric, &fingerprint, plan.seed, plan.n);
                    save(&l)?;
                    l
                }
            };
            if ledger.target < plan.n {
                ledger.target = plan.n;
                save(&ledger)?;
            }
            let target = ledger.target;
            glp_extend(&mut ledger, target, scheduler, save)?;
            ledger
        }
        Algorithm::Optimal => match existing {
            Some(l) if l.is_complete() => l,
            _ => {
                let metric = scheduler.metric_kind(&plan.task)?;
                let mut l =
                    PruneLedger::new(Algorithm::Optimal, topology, &plan.task, metric, &fingerprint, plan.seed, plan.n);
                save(&l)?;
                let outcome = optimal_search(&topology, &plan.task, plan.n, scheduler, plan.seed)?;
                l.optimal_pruned = Some(outcome.solution.pruned);
                l.subsets = outcome.table;
                save(&l)?;
                l
            }
        },
    };
    Ok(ledger)
}

/// Picks up the search recorded at `ledger_path` and runs it to its target.
pub fn resume<E: Evaluator>(scheduler: &Scheduler<E>, ledger_path: &Path) -> Result<PruneLedger, OrchestratorError> {
    let ledger = load_ledger(ledger_path)?;
    let plan = SearchPlan {
        algorithm: ledger.algorithm,
        task: ledger.task.clone(),
        depth: ledger.depth,
        n: ledger.target,
        seed: ledger.seed,
    };
    run_search(scheduler, &plan, Some(ledger_path))
}
