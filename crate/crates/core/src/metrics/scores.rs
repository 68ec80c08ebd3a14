use super::{MetricError, MetricKind, MetricValue};

fn check_lengths<A, B>(preds: &[A], golds: &[B], needed: usize) -> Result<(), MetricError> {
    if preds.len() != golds.len() {
        return Err(MetricError::LengthMismatch { left: preds.len(), right: golds.len() });
    }
    if preds.len() < needed {
        return Err(MetricError::TooFew { needed, got: preds.len() });
    }
    Ok(())
}

/// Fraction of positions where prediction and reference agree.
pub fn accuracy(preds: &[usize], golds: &[usize]) -> Result<MetricValue, MetricError> {
    check_lengths(preds, golds, 1)?;
    let hits = preds.iter().zip(golds).filter(|(p, g)| p == g).count();
    Ok(MetricValue::new(MetricKind::Accuracy, hits as f64 / preds.len() as f64))
}

#[derive(Debug, Default, Clone, Copy)]
struct Confusion {
    tp: u64,
    tn: u64,
    fp: u64,
    fn_: u64,
}

fn confusion(preds: &[usize], golds: &[usize]) -> Result<Confusion, MetricError> {
    check_lengths(preds, golds, 1)?;
    let mut c = Confusion::default();
    for (&p, &g) in preds.iter().zip(golds) {
        if p > 1 {
            return Err(MetricError::NonBinary(p));
        }
        if g > 1 {
            return Err(MetricError::NonBinary(g));
        }
        match (p, g) {
            (1, 1) => c.tp += 1,
            (0, 0) => c.tn += 1,
            (1, 0) => c.fp += 1,
            _ => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Binary F1 of the positive class (label 1). Zero when there are no
/// positives in either predictions or references.
pub fn f1_binary(preds: &[usize], golds: &[usize]) -> Result<MetricValue, MetricError> {
    let c = confusion(preds, golds)?;
    let denom = 2 * c.tp + c.fp + c.fn_;
    let value = if denom == 0 { 0.0 } else { (2 * c.tp) as f64 / denom as f64 };
    Ok(MetricValue::new(MetricKind::F1, value))
}

/// Matthews correlation coefficient for binary labels; 0 when any marginal
/// of the confusion matrix is empty.
pub fn matthews_corr(preds: &[usize], golds: &[usize]) -> Result<MetricValue, MetricError> {
    let c = confusion(preds, golds)?;
    let (tp, tn, fp, fn_) = (c.tp as f64, c.tn as f64, c.fp as f64, c.fn_ as f64);
    let factors = [tp + fp, tp + fn_, tn + fp, tn + fn_];
    let value = if factors.contains(&0.0) {
        0.0
    } else {
        let denom = factors.iter().product::<f64>().sqrt();
        ((tp * tn - fp * fn_) / denom).clamp(-1.0, 1.0)
    };
    Ok(MetricValue::new(MetricKind::MatthewsCorr, value))
}

/// 1-based ranks with ties sharing the average of the positions they span.
pub(crate) fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        // positions start..end hold 1-based ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricError::ConstantInput);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation: Pearson correlation of average-ranked data.
pub fn spearman_corr(x: &[f64], y: &[f64]) -> Result<MetricValue, MetricError> {
    check_lengths(x, y, 2)?;
    let value = pearson(&average_ranks(x), &average_ranks(y))?;
    Ok(MetricValue::new(MetricKind::SpearmanCorr, value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Independent naive re-implementations: counting loops and O(n^2) ranks.
    fn naive_accuracy(p: &[usize], g: &[usize]) -> f64 {
        let mut same = 0;
        for i in 0..p.len() {
            if p[i] == g[i] {
                same += 1;
            }
        }
        same as f64 / p.len() as f64
    }

    fn naive_cells(p: &[usize], g: &[usize]) -> [f64; 4] {
        let mut m = [[0.0f64; 2]; 2];
        for i in 0..p.len() {
            m[p[i]][g[i]] += 1.0;
        }
        // tp, tn, fp, fn
        [m[1][1], m[0][0], m[1][0], m[0][1]]
    }

    fn naive_f1(p: &[usize], g: &[usize]) -> f64 {
        let [tp, _, fp, fn_] = naive_cells(p, g);
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    }

    fn naive_mcc(p: &[usize], g: &[usize]) -> f64 {
        let [tp, tn, fp, fn_] = naive_cells(p, g);
        let d = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        if d == 0.0 {
            0.0
        } else {
            (tp * tn - fp * fn_) / d.sqrt()
        }
    }

    fn naive_rank(xs: &[f64], i: usize) -> f64 {
        let less = xs.iter().filter(|&&v| v < xs[i]).count() as f64;
        let equal = xs.iter().filter(|&&v| v == xs[i]).count() as f64;
        less + (equal + 1.0) / 2.0
    }

    fn naive_spearman(x: &[f64], y: &[f64]) -> f64 {
        let rx: Vec<f64> = (0..x.len()).map(|i| naive_rank(x, i)).collect();
        let ry: Vec<f64> = (0..y.len()).map(|i| naive_rank(y, i)).collect();
        let n = x.len() as f64;
        let mx = rx.iter().sum::<f64>() / n;
        let my = ry.iter().sum::<f64>() / n;
        let cov: f64 = (0..x.len()).map(|i| (rx[i] - mx) * (ry[i] - my)).sum();
        let vx: f64 = rx.iter().map(|r| (r - mx).powi(2)).sum();
        let vy: f64 = ry.iter().map(|r| (r - my).powi(2)).sum();
        cov / (vx * vy).sqrt()
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[1, 0, 2], &[1, 0, 2]).unwrap().value, 1.0);
        assert_eq!(accuracy(&[1, 0, 1, 1], &[1, 1, 1, 0]).unwrap().value, 0.5);
        assert!(matches!(accuracy(&[], &[]), Err(MetricError::TooFew { .. })));
        assert!(matches!(accuracy(&[1], &[1, 0]), Err(MetricError::LengthMismatch { .. })));
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1_binary(&[1, 0, 1], &[1, 0, 1]).unwrap().value, 1.0);
        // TP=2 FP=1 FN=1
        let v = f1_binary(&[1, 1, 1, 0, 0], &[1, 1, 0, 1, 0]).unwrap().value;
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f1_binary(&[0, 0], &[0, 0]).unwrap().value, 0.0);
        assert_eq!(f1_binary(&[2], &[1]), Err(MetricError::NonBinary(2)));
    }

    #[test]
    fn matthews_examples() {
        let g = [1, 0, 1, 1, 0, 0];
        let inv: Vec<usize> = g.iter().map(|x| 1 - x).collect();
        assert_eq!(matthews_corr(&g, &g).unwrap().value, 1.0);
        assert_eq!(matthews_corr(&inv, &g).unwrap().value, -1.0);
        // TP=6 TN=3 FP=1 FN=2
        let mut p = vec![1; 6];
        let mut gg = vec![1; 6];
        p.extend([0, 0, 0]);
        gg.extend([0, 0, 0]);
        p.push(1);
        gg.push(0);
        p.extend([0, 0]);
        gg.extend([1, 1]);
        let expected = naive_mcc(&p, &gg);
        // (18 - 2) / sqrt(7 * 8 * 4 * 5)
        assert!((expected - 16.0 / 1120f64.sqrt()).abs() < 1e-15);
        assert!((matthews_corr(&p, &gg).unwrap().value - expected).abs() < 1e-15);
        assert_eq!(matthews_corr(&[1, 1], &[1, 0]).unwrap().value, 0.0);
    }

    #[test]
    fn spearman_examples() {
        let v = spearman_corr(&[1.0, 2.0, 3.0, 4.0], &[2.0, 5.0, 9.0, 10.0]).unwrap().value;
        assert_eq!(v, 1.0);
        let v = spearman_corr(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap().value;
        assert!((v + 0.5).abs() < 1e-15);
        assert_eq!(spearman_corr(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(MetricError::ConstantInput));
        assert!(matches!(spearman_corr(&[1.0], &[1.0]), Err(MetricError::TooFew { .. })));
    }

    #[test]
    fn average_ranks_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn random_cases_match_naive_reimplementation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let n = rng.gen_range(2..60);
            let p: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            let g: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            assert_eq!(accuracy(&p, &g).unwrap().value, naive_accuracy(&p, &g));
            assert!((f1_binary(&p, &g).unwrap().value - naive_f1(&p, &g)).abs() < 1e-15);
            assert!((matthews_corr(&p, &g).unwrap().value - naive_mcc(&p, &g)).abs() <= 1e-12);
            // coarse grid produces plenty of ties
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0..6) as f64).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0..6) as f64 * 0.5).collect();
            match spearman_corr(&x, &y) {
                Ok(v) => assert!((v.value - naive_spearman(&x, &y)).abs() <= 1e-12),
                Err(e) => assert_eq!(e, MetricError::ConstantInput),
            }
        }
    }

    #[test]
    fn order_preserving_relabel_keeps_spearman() {
        let x = [0.3, 1.2, -0.5, 2.2, 0.9];
        let y = [1.0, 0.1, 0.4, 3.0, 2.0];
        let a = spearman_corr(&x, &y).unwrap().value;
        let x2: Vec<f64> = x.iter().map(|v| v.exp() * 10.0 - 3.0).collect();
        let b = spearman_corr(&x2, &y).unwrap().value;
        assert!((a - b).abs() < 1e-15);
    }
}
