use super::train::{fine_tune_and_score, ToyScore};
use super::{make_synthetic_tasks, Checkpoint, TrainSpec};
use crate::fingerprint;
use crate::metrics::{MetricKind, MetricValue, SplitSpec};
use crate::orchestrator::{EvalRequest, Evaluation, Evaluator};
use crate::prune::{LayerId, OracleError, ScoreOracle};
use crate::task::TaskSpec;

/// Scores kept-layer sets by fine-tuning the toy checkpoint on one of the
/// synthetic tasks.
#[derive(Debug, Clone)]
pub struct ToyOracle {
    checkpoint: Checkpoint,
    tasks: Vec<TaskSpec>,
    train: TrainSpec,
    split: SplitSpec,
    task_seed: u64,
    loss_metric: bool,
    fingerprint: String,
}

impl ToyOracle {
    pub fn new(checkpoint: Checkpoint, task_seed: u64, train: TrainSpec, split: SplitSpec) -> Self {
        let tasks = make_synthetic_tasks(task_seed);
        let mut o = Self { checkpoint, tasks, train, split, task_seed, loss_metric: false, fingerprint: String::new() };
        o.refresh_fingerprint();
        o
    }

    /// The bundled depth-6 checkpoint with default training settings.
    pub fn fixture() -> Self {
        Self::new(Checkpoint::fixture(), 0, TrainSpec::toy(), SplitSpec::default())
    }

    /// Score every task by negated validation loss instead of its own metric.
    pub fn with_loss_metric(mut self, on: bool) -> Self {
        self.loss_metric = on;
        self.refresh_fingerprint();
        self
    }

    fn refresh_fingerprint(&mut self) {
        let hash = fingerprint::digest_str(&[&self.checkpoint.content_hash(), &self.hyperparameters()]);
        self.fingerprint = format!("toy-{hash}");
    }

    fn hyperparameters(&self) -> String {
        serde_json::json!({
            "train": self.train,
            "split": self.split,
            "task_seed": self.task_seed,
            "metric": if self.loss_metric { "neg_val_loss" } else { "task" },
        })
        .to_string()
    }

    pub fn fingerprint(&self) -> String {
        self.fingerprint.clone()
    }

    pub fn metric_kind(&self, task: &str) -> Result<MetricKind, OracleError> {
        let spec = self.task(task)?;
        Ok(if self.loss_metric { MetricKind::NegValidationLoss } else { spec.metric })
    }

    pub fn checkpoint(&self) -> &Checkpoint {
        &self.checkpoint
    }

    pub fn tasks(&self) -> &[TaskSpec] {
        &self.tasks
    }

    pub fn task(&self, name: &str) -> Result<&TaskSpec, OracleError> {
        self.tasks.iter().find(|t| t.name == name).ok_or_else(|| OracleError::UnknownTask(name.to_string()))
    }

    /// Full trial outcome, including validation loss and failure detail.
    pub fn trial(&self, kept: &[LayerId], task: &str, seed: u64) -> Result<ToyScore, OracleError> {
        let spec = self.task(task)?;
        let metric = self.metric_kind(task)?;
        fine_tune_and_score(&self.checkpoint, kept, spec, seed, &self.train, &self.split, metric)
            .map_err(|e| OracleError::Evaluation(e.to_string()))
    }
}

impl ScoreOracle for ToyOracle {
    fn fingerprint(&self) -> String {
        ToyOracle::fingerprint(self)
    }

    fn metric_kind(&self, task: &str) -> Result<MetricKind, OracleError> {
        ToyOracle::metric_kind(self, task)
    }

    fn score(&self, kept: &[LayerId], task: &str, seed: u64) -> Result<MetricValue, OracleError> {
        self.trial(kept, task, seed).map(|t| t.metric)
    }
}

impl Evaluator for ToyOracle {
    fn fingerprint(&self) -> String {
        ToyOracle::fingerprint(self)
    }

    fn hyperparameters(&self) -> String {
        ToyOracle::hyperparameters(self)
    }

    fn metric_kind(&self, task: &str) -> Result<MetricKind, OracleError> {
        ToyOracle::metric_kind(self, task)
    }

    fn evaluate(&self, request: &EvalRequest) -> Result<Evaluation, OracleError> {
        let t = self.trial(&request.kept, &request.task, request.seed)?;
        Ok(Evaluation { metric: t.metric, val_loss: Some(t.val_loss), detail: t.failure })
    }
}
