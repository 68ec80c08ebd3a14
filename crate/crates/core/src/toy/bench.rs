//! Forward-pass latency of the toy classifier as layers are removed.

use super::tasks::SEQ_LEN;
use super::{ToyConfig, ToyError, ToyTransformer};
use crate::metrics::median_of_runs;
use serde::Serialize;
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    /// Number of encoder layers kept.
    pub depth: usize,
    pub median_ms: f64,
    /// Latency of the full-depth model divided by this row's latency.
    pub speedup: f64,
}

/// Median forward latency on a batch of `batch` sequences for each depth in
/// `depths`, each measured on the bottom `depth` layers of a model built with
/// `config`.
pub fn forward_latency(
    config: ToyConfig,
    depths: &[usize],
    batch: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<BenchRow>, ToyError> {
    if reps == 0 || batch == 0 {
        return Err(ToyError::Config("batch size and repetitions must be positive".into()));
    }
    if let Some(&d) = depths.iter().find(|&&d| d > config.depth) {
        return Err(ToyError::Config(format!("depth {d} exceeds model depth {}", config.depth)));
    }
    let full = ToyTransformer::random(config, seed)?;
    let seq: Vec<u32> = (0..SEQ_LEN.min(config.max_len)).map(|i| (2 + i % (config.vocab - 2)) as u32).collect();
    let batch = vec![seq; batch];
    // the full model is the speedup reference; measure it once
    let reference_at = depths.iter().position(|&d| d == config.depth).unwrap_or(depths.len());
    let extra = (reference_at == depths.len()).then_some(config.depth);
    let mut models = Vec::with_capacity(depths.len() + 1);
    for &depth in depths.iter().chain(extra.iter()) {
        let mut model = full.clone();
        model.prune_to(&(0..depth).collect::<Vec<_>>())?;
        for _ in 0..reps.div_ceil(10) {
            std::hint::black_box(model.forward(&batch)?);
        }
        models.push(model);
    }
    // round-robin so clock drift and background load hit every depth alike
    let mut times = vec![Vec::with_capacity(reps); models.len()];
    for _ in 0..reps {
        for (model, t) in models.iter().zip(times.iter_mut()) {
            let start = Instant::now();
            std::hint::black_box(model.forward(std::hint::black_box(&batch))?);
            t.push(start.elapsed().as_secs_f64() * 1e3);
        }
    }
    let medians = times.iter().map(|t| median_of_runs(t)).collect::<Result<Vec<_>, _>>()?;
    let reference = medians[reference_at];
    Ok(depths.iter().zip(medians).map(|(&depth, m)| BenchRow { depth, median_ms: m, speedup: reference / m }).collect())
}
