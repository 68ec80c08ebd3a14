use super::MetricError;

/// Median; the mean of the two middle values for even counts.
pub fn median_of_runs(values: &[f64]) -> Result<f64, MetricError> {
    if values.is_empty() {
        return Err(MetricError::TooFew { needed: 1, got: 0 });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Ok(if sorted.len() % 2 == 1 { sorted[mid] } else { (sorted[mid - 1] + sorted[mid]) / 2.0 })
}

/// Pruned score as a percentage of the unpruned baseline. Values above 100
/// are legitimate.
pub fn relative_performance(pruned: f64, baseline: f64) -> Result<f64, MetricError> {
    if baseline == 0.0 {
        return Err(MetricError::ZeroBaseline);
    }
    Ok(100.0 * pruned / baseline)
}
