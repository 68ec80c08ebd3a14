use super::checkpoint::Checkpoint;
use super::model::{MaskedLm, ToyTransformer};
use super::optim::AdamW;
use super::params::{ClassifierHead, Parameters};
use super::tasks::{pretraining_corpus, MASK_TOKEN};
use super::{ToyConfig, ToyError, TrainSpec};
use crate::metrics::{self, MetricKind, MetricValue, SplitSpec};
use crate::task::{Example, TaskSpec};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of one fine-tune-and-score trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyScore {
    pub metric: MetricValue,
    /// Mean cross-entropy on the validation split.
    pub val_loss: f64,
    /// Set when training diverged; `metric` then holds the failed sentinel.
    pub failure: Option<String>,
}

/// Trains `model` on `examples` for `spec.epochs` epochs of shuffled
/// minibatches. Returns the mean training loss of each epoch.
pub fn train_classifier(
    model: &mut ToyTransformer,
    examples: &[&Example],
    spec: &TrainSpec,
    seed: u64,
) -> Result<Vec<f64>, ToyError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005E_ED0F_7EA1);
    let mut opt = AdamW::new(spec);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut history = Vec::with_capacity(spec.epochs);
    for _ in 0..spec.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(spec.batch_size) {
            let batch: Vec<Vec<u32>> = chunk.iter().map(|&i| examples[i].tokens.clone()).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| examples[i].label).collect();
            total += model.backward_and_step(&batch, &labels, &mut opt, &mut rng)?;
            batches += 1;
        }
        history.push(total / batches.max(1) as f64);
    }
    Ok(history)
}

/// Scores `model` on `examples` with `metric`; also returns the mean
/// validation cross-entropy.
pub fn evaluate(model: &ToyTransformer, examples: &[&Example], metric: MetricKind) -> Result<(MetricValue, f64), ToyError> {
    let mut probs = Vec::with_capacity(examples.len());
    let mut loss = 0.0;
    for chunk in examples.chunks(64) {
        let batch: Vec<Vec<u32>> = chunk.iter().map(|e| e.tokens.clone()).collect();
        let p = model.probabilities(&batch)?;
        for (row, e) in p.rows().into_iter().zip(chunk) {
            loss -= row[e.label].max(f64::MIN_POSITIVE).ln();
            probs.push(row.to_vec());
        }
    }
    let loss = loss / examples.len() as f64;
    let argmax = |p: &Vec<f64>| p.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap();
    let preds: Vec<usize> = probs.iter().map(argmax).collect();
    let golds: Vec<usize> = examples.iter().map(|e| e.label).collect();
    let value = match metric {
        MetricKind::Accuracy => metrics::accuracy(&preds, &golds)?,
        MetricKind::F1 => metrics::f1_binary(&preds, &golds)?,
        MetricKind::MatthewsCorr => metrics::matthews_corr(&preds, &golds)?,
        MetricKind::SpearmanCorr => {
            let expected: Vec<f64> = probs.iter().map(|p| p.iter().enumerate().map(|(c, v)| c as f64 * v).sum()).collect();
            let targets: Vec<f64> = examples.iter().map(|e| e.target).collect();
            match metrics::spearman_corr(&expected, &targets) {
                Ok(v) => v,
                // a collapsed model predicts a constant: no rank information
                Err(metrics::MetricError::ConstantInput) => MetricValue::new(MetricKind::SpearmanCorr, 0.0),
                Err(e) => return Err(e.into()),
            }
        }
        MetricKind::NegValidationLoss => MetricValue::new(MetricKind::NegValidationLoss, -loss),
        MetricKind::Synthetic => return Err(ToyError::Config("the toy model cannot produce synthetic scores".into())),
    };
    Ok((value, loss))
}

/// Loads the checkpoint, keeps only `kept` layers, attaches a fresh
/// classifier, fine-tunes on the training part of the task's split and
/// scores the held-out part.
pub fn fine_tune_and_score(
    checkpoint: &Checkpoint,
    kept: &[usize],
    task: &TaskSpec,
    seed: u64,
    spec: &TrainSpec,
    split: &SplitSpec,
    metric: MetricKind,
) -> Result<ToyScore, ToyError> {
    if kept.is_empty() {
        return Err(ToyError::Input("at least one layer must be kept".into()));
    }
    let parts = metrics::split_train_validation(task, split)?;
    let train: Vec<&Example> = parts.train.iter().map(|&i| &task.examples[i]).collect();
    let valid: Vec<&Example> = parts.validation.iter().map(|&i| &task.examples[i]).collect();

    let config = ToyConfig { classes: task.num_classes, ..checkpoint.config };
    let mut encoder = checkpoint.encoder.clone();
    let missing = encoder.retain_layers(kept);
    if !missing.is_empty() {
        return Err(ToyError::Input(format!("checkpoint has no layers {missing:?}")));
    }
    let mut head_rng = ChaCha8Rng::seed_from_u64(seed);
    let head = ClassifierHead::random(config.width, config.classes, &mut head_rng);
    let mut model = ToyTransformer { config, encoder, head };

    match train_classifier(&mut model, &train, spec, seed) {
        Ok(_) => {}
        Err(e @ ToyError::NonFinite { .. }) => {
            log::warn!("trial keeping {kept:?} diverged: {e}");
            return Ok(ToyScore { metric: MetricValue::failed(metric), val_loss: f64::NAN, failure: Some(e.to_string()) });
        }
        Err(e) => return Err(e),
    }
    let (value, val_loss) = evaluate(&model, &valid, metric)?;
    if !value.value.is_finite() {
        let msg = format!("non-finite {metric} after training");
        return Ok(ToyScore { metric: MetricValue::failed(metric), val_loss, failure: Some(msg) });
    }
    Ok(ToyScore { metric: value, val_loss, failure: None })
}

/// Settings for masked-token pretraining.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PretrainSpec {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub mask_rate: f64,
    pub corpus_size: usize,
}

impl Default for PretrainSpec {
    fn default() -> Self {
        Self { steps: 1500, batch_size: 32, lr: 1e-3, mask_rate: 0.15, corpus_size: 4000 }
    }
}

/// Masked-token pretraining on the synthetic corpus. Fully determined by
/// `config`, `spec` and `seed`.
pub fn pretrain(config: ToyConfig, spec: &PretrainSpec, seed: u64) -> Result<Checkpoint, ToyError> {
    let mut model = MaskedLm::random(config, seed)?;
    let corpus = pretraining_corpus(seed, spec.corpus_size);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut opt = AdamW::new(&TrainSpec { lr: spec.lr, ..TrainSpec::toy() });
    for step in 0..spec.steps {
        let mut inputs = Vec::with_capacity(spec.batch_size);
        let mut targets = Vec::with_capacity(spec.batch_size);
        for _ in 0..spec.batch_size {
            let seq = &corpus[rng.gen_range(0..corpus.len())];
            let mut input = seq.clone();
            let mut target = vec![None; seq.len()];
            for (i, tok) in seq.iter().enumerate() {
                if rng.gen::<f64>() < spec.mask_rate {
                    input[i] = MASK_TOKEN;
                    target[i] = Some(*tok);
                }
            }
            if target.iter().all(Option::is_none) {
                let i = rng.gen_range(0..seq.len());
                input[i] = MASK_TOKEN;
                target[i] = Some(seq[i]);
            }
            inputs.push(input);
            targets.push(target);
        }
        let (loss, grads) = model.loss_and_grads(&inputs, &targets, Some(&mut rng))?;
        if !loss.is_finite() {
            return Err(ToyError::NonFinite { loss, grad_norm: grads.squared_norm().sqrt(), layer_norms: Vec::new() });
        }
        opt.step(model.tensors_mut(), grads.tensors());
        if step % 250 == 0 || step + 1 == spec.steps {
            log::info!("pretrain step {step}: masked-token loss {loss:.4}");
        }
    }
    // stored weights are f32; hand back exactly what a reload would see
    Checkpoint::from_bytes(&Checkpoint { config, encoder: model.encoder, lm: model.lm }.to_bytes())
}
