use super::cache::ResultCache;
use super::request::{hparams_hash, EvalRequest, EvalResult, Evaluator};
use super::OrchestratorError;
use crate::metrics::{MetricKind, MetricValue};
use crate::prune::{LayerId, OracleError, ScoreOracle};
use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, MutexGuard};
use std::time::Instant;

/// Runs evaluation requests through a cache, up to `parallelism` at a time.
///
/// Implements [`ScoreOracle`], so every search strategy can run on top of
/// it unchanged: a greedy step hands over all its candidates in one
/// `score_many` call, and the step's argmax only runs once all of them are
/// back and journaled.
pub struct Scheduler<E> {
    evaluator: E,
    cache: Mutex<ResultCache>,
    parallelism: usize,
    fingerprint: String,
    hparams: String,
    fresh: AtomicUsize,
    hits: AtomicUsize,
}

impl<E: Evaluator> Scheduler<E> {
    pub fn new(evaluator: E, cache: ResultCache, parallelism: usize) -> Result<Self, OrchestratorError> {
        if parallelism == 0 {
            return Err(OrchestratorError::InvalidRequest("parallelism must be at least 1".into()));
        }
        let fingerprint = evaluator.fingerprint();
        let hparams = hparams_hash(&evaluator.hyperparameters());
        Ok(Self {
            evaluator,
            cache: Mutex::new(cache),
            parallelism,
            fingerprint,
            hparams,
            fresh: AtomicUsize::new(0),
            hits: AtomicUsize::new(0),
        })
    }

    pub fn evaluator(&self) -> &E {
        &self.evaluator
    }

    pub fn parallelism(&self) -> usize {
        self.parallelism
    }

    /// Evaluations actually executed (cache misses) so far.
    pub fn evaluations(&self) -> usize {
        self.fresh.load(Ordering::SeqCst)
    }

    pub fn cache_hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn cached_results(&self) -> usize {
        self.lock().len()
    }

    fn lock(&self) -> MutexGuard<'_, ResultCache> {
        // a panicking worker cannot leave the map half-updated
        self.cache.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn request(&self, task: &str, kept: &[LayerId], seed: u64) -> EvalRequest {
        let mut kept = kept.to_vec();
        kept.sort_unstable();
        EvalRequest { task: task.to_string(), kept, seed, oracle: self.fingerprint.clone(), hparams: self.hparams.clone() }
    }

    /// Resolves every request, from the cache when possible. Duplicates are
    /// evaluated once. Results line up with `requests`. Fresh results are
    /// journaled as soon as they arrive; errors are not cached.
    pub fn run_step(&self, requests: &[EvalRequest]) -> Vec<Result<EvalResult, OracleError>> {
        let keys: Vec<String> = requests.iter().map(EvalRequest::key).collect();
        let mut done: HashMap<&str, Result<EvalResult, OracleError>> = HashMap::new();
        let mut pending: Vec<(&str, &EvalRequest)> = Vec::new();
        {
            let cache = self.lock();
            let mut queued = HashSet::new();
            for (key, req) in keys.iter().zip(requests) {
                if done.contains_key(key.as_str()) || queued.contains(key.as_str()) {
                    continue;
                }
                match cache.get(key) {
                    Some(hit) => {
                        self.hits.fetch_add(1, Ordering::SeqCst);
                        done.insert(key, Ok(hit.clone()));
                    }
                    None => {
                        queued.insert(key.as_str());
                        pending.push((key, req));
                    }
                }
            }
        }

        let slots: Vec<Mutex<Option<Result<EvalResult, OracleError>>>> = pending.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let work = || loop {
            let i = next.fetch_add(1, Ordering::SeqCst);
            let Some((_, req)) = pending.get(i) else { break };
            let out = self.evaluate_one(req);
            *slots[i].lock().unwrap_or_else(|p| p.into_inner()) = Some(out);
        };
        let workers = self.parallelism.min(pending.len());
        if workers <= 1 {
            work();
        } else {
            std::thread::scope(|s| {
                for _ in 0..workers {
                    s.spawn(work);
                }
            });
        }
        for ((key, _), slot) in pending.iter().zip(slots) {
            let out = slot.into_inner().unwrap_or_else(|p| p.into_inner()).expect("every pending request is taken");
            done.insert(key, out);
        }
        keys.iter().map(|k| done[k.as_str()].clone()).collect()
    }

    fn evaluate_one(&self, req: &EvalRequest) -> Result<EvalResult, OracleError> {
        let start = Instant::now();
        let eval = self.evaluator.evaluate(req)?;
        self.fresh.fetch_add(1, Ordering::SeqCst);
        let result = EvalResult::new(req.clone(), eval, start.elapsed().as_secs_f64());
        self.lock().insert(result.clone()).map_err(|e| OracleError::Persist(e.to_string()))?;
        Ok(result)
    }
}

impl<E: Evaluator> ScoreOracle for Scheduler<E> {
    fn fingerprint(&self) -> String {
        self.fingerprint.clone()
    }

    fn metric_kind(&self, task: &str) -> Result<MetricKind, OracleError> {
        self.evaluator.metric_kind(task)
    }

    fn score(&self, kept: &[LayerId], task: &str, seed: u64) -> Result<MetricValue, OracleError> {
        self.score_many(&[kept.to_vec()], task, seed).pop().expect("one request, one result")
    }

    fn score_many(&self, kept_sets: &[Vec<LayerId>], task: &str, seed: u64) -> Vec<Result<MetricValue, OracleError>> {
        let requests: Vec<EvalRequest> = kept_sets.iter().map(|k| self.request(task, k, seed)).collect();
        self.run_step(&requests).into_iter().map(|r| r.map(|e| e.value())).collect()
    }
}
