use super::request::Evaluator;
use super::scheduler::Scheduler;
use super::OrchestratorError;
use crate::metrics::{median_of_runs, relative_performance, MetricKind};
use crate::prune::{Algorithm, LayerId, PruneLedger};
use std::fmt::Write;

/// One column of a report: the unpruned model or a ledger's final set.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportColumn {
    /// `baseline`, or the ledger's algorithm name.
    pub label: String,
    pub algorithm: Option<Algorithm>,
    /// Pruned layers in chain order.
    pub chain: Vec<LayerId>,
    /// One score per seed, in seed order.
    pub scores: Vec<f64>,
    pub median: f64,
    /// `100 * median / baseline median`, when defined.
    pub relative: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub task: String,
    pub metric: MetricKind,
    pub depth: usize,
    pub seeds: Vec<u64>,
    pub baseline: ReportColumn,
    pub columns: Vec<ReportColumn>,
    /// The ledgers reported on, for the per-step candidate data.
    pub ledgers: Vec<PruneLedger>,
}

fn median_score(scores: &[f64]) -> f64 {
    if scores.iter().any(|s| !s.is_finite()) {
        return f64::NEG_INFINITY;
    }
    median_of_runs(scores).unwrap_or(f64::NEG_INFINITY)
}

/// Re-evaluates the final pruned model of every ledger, and the unpruned
/// baseline, under each seed.
pub fn report<E: Evaluator>(
    scheduler: &Scheduler<E>,
    ledgers: &[PruneLedger],
    seeds: &[u64],
) -> Result<Report, OrchestratorError> {
    let first = ledgers.first().ok_or_else(|| OrchestratorError::InvalidRequest("no ledgers to report".into()))?;
    if seeds.is_empty() {
        return Err(OrchestratorError::InvalidRequest("at least one seed is required".into()));
    }
    for l in ledgers {
        if l.task != first.task || l.depth != first.depth {
            return Err(OrchestratorError::InvalidRequest(format!(
                "ledgers mix tasks or depths: {} (depth {}) and {} (depth {})",
                first.task, first.depth, l.task, l.depth
            )));
        }
    }
    let task = first.task.clone();
    let metric = scheduler.evaluator().metric_kind(&task)?;
    let all: Vec<LayerId> = (0..first.depth).collect();

    let mut sets: Vec<(String, Option<Algorithm>, Vec<LayerId>)> = vec![("baseline".into(), None, Vec::new())];
    for l in ledgers {
        sets.push((l.algorithm.to_string(), Some(l.algorithm), l.chain()));
    }
    let mut requests = Vec::with_capacity(sets.len() * seeds.len());
    for (_, _, chain) in &sets {
        let kept: Vec<LayerId> = all.iter().copied().filter(|l| !chain.contains(l)).collect();
        requests.extend(seeds.iter().map(|&s| scheduler.request(&task, &kept, s)));
    }
    let results = scheduler.run_step(&requests);
    let mut columns = Vec::with_capacity(sets.len());
    for (i, (label, algorithm, chain)) in sets.into_iter().enumerate() {
        let mut scores = Vec::with_capacity(seeds.len());
        for r in &results[i * seeds.len()..(i + 1) * seeds.len()] {
            scores.push(r.clone()?.score);
        }
        let median = median_score(&scores);
        columns.push(ReportColumn { label, algorithm, chain, scores, median, relative: None });
    }
    let mut baseline = columns.remove(0);
    baseline.relative = relative_performance(baseline.median, baseline.median).ok();
    for c in &mut columns {
        c.relative = relative_performance(c.median, baseline.median).ok().filter(|r| r.is_finite());
    }
    Ok(Report { task, metric, depth: first.depth, seeds: seeds.to_vec(), baseline, columns, ledgers: ledgers.to_vec() })
}

fn fmt_score(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        "failed".into()
    }
}

fn fmt_chain(chain: &[LayerId]) -> String {
    let inner: Vec<String> = chain.iter().map(|l| l.to_string()).collect();
    format!("[{}]", inner.join(","))
}

impl Report {
    /// Human-readable table with the columns side by side.
    pub fn to_table(&self) -> String {
        let cols: Vec<&ReportColumn> = std::iter::once(&self.baseline).chain(&self.columns).collect();
        let width = cols.iter().map(|c| fmt_chain(&c.chain).len().max(c.label.len())).max().unwrap_or(8).max(10) + 2;
        let mut out = String::new();
        let seeds: Vec<String> = self.seeds.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(out, "task {} ({}), depth {}, seeds [{}]", self.task, self.metric, self.depth, seeds.join(", "));
        let row = |out: &mut String, name: &str, cells: Vec<String>| {
            let _ = write!(out, "{name:<10}");
            for c in cells {
                let _ = write!(out, "{c:>width$}");
            }
            out.push('\n');
        };
        row(&mut out, "", cols.iter().map(|c| c.label.clone()).collect());
        row(&mut out, "pruned", cols.iter().map(|c| fmt_chain(&c.chain)).collect());
        row(&mut out, "median", cols.iter().map(|c| fmt_score(c.median)).collect());
        row(
            &mut out,
            "Rel.",
            cols.iter().map(|c| c.relative.map_or("-".to_string(), |r| format!("{r:.1}"))).collect(),
        );
        let steps = self.columns.iter().map(|c| c.chain.len()).max().unwrap_or(0);
        if steps > 0 {
            out.push('\n');
            row(&mut out, "step", self.columns.iter().map(|c| c.label.clone()).collect());
            for k in 0..steps {
                let cells = self
                    .columns
                    .iter()
                    .map(|c| match c.algorithm {
                        Some(Algorithm::Optimal) if k == 0 => fmt_chain(&c.chain),
                        Some(Algorithm::Optimal) => String::new(),
                        _ => c.chain.get(k).map_or(String::new(), |l| l.to_string()),
                    })
                    .collect();
                row(&mut out, &(k + 1).to_string(), cells);
            }
        }
        out
    }

    /// `series,n,pruned,seed,score` for every evaluated seed.
    pub fn scores_csv(&self) -> String {
        let mut out = String::from("series,n,pruned,seed,score\n");
        for c in std::iter::once(&self.baseline).chain(&self.columns) {
            for (seed, s) in self.seeds.iter().zip(&c.scores) {
                let _ = writeln!(out, "{},{},{},{},{}", c.label, c.chain.len(), csv_chain(&c.chain), seed, csv_num(*s));
            }
        }
        out
    }

    /// `series,n,pruned,median,relative`.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("series,n,pruned,median,relative\n");
        for c in std::iter::once(&self.baseline).chain(&self.columns) {
            let rel = c.relative.map_or(String::new(), |r| r.to_string());
            let _ = writeln!(out, "{},{},{},{},{}", c.label, c.chain.len(), csv_chain(&c.chain), csv_num(c.median), rel);
        }
        out
    }

    /// Every candidate score recorded during the searches:
    /// `series,step,layer,score,chosen` (for optimal: `step` is `n` and
    /// `layer` lists the subset).
    pub fn candidates_csv(&self) -> String {
        let mut out = String::from("series,step,layer,score,chosen\n");
        for l in &self.ledgers {
            for s in &l.steps {
                for c in &s.candidates {
                    let _ = writeln!(out, "{},{},{},{},{}", l.algorithm, s.step, c.layer, csv_num(c.score), u8::from(c.layer == s.chosen));
                }
            }
            let best = l.optimal_pruned.clone().unwrap_or_default();
            for sub in &l.subsets {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    l.algorithm,
                    sub.pruned.len(),
                    csv_chain(&sub.pruned),
                    csv_num(sub.score),
                    u8::from(sub.pruned == best)
                );
            }
        }
        out
    }
}

fn csv_chain(chain: &[LayerId]) -> String {
    chain.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" ")
}

fn csv_num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        "-inf".into()
    }
}
