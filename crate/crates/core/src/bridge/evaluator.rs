use super::session::{BridgeError, CallError, Session};
use super::wire::{Hyperparameters, WireRequest, WireStatus, PROTOCOL_VERSION};
use crate::fingerprint;
use crate::metrics::{MetricKind, MetricValue};
use crate::orchestrator::{EvalRequest, Evaluation, Evaluator};
use crate::prune::OracleError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::Duration;

/// The metric conventionally reported for a GLUE task name; accuracy for
/// anything unrecognised.
pub fn glue_metric(task: &str) -> MetricKind {
    match task.to_ascii_lowercase().replace('-', "").as_str() {
        "cola" => MetricKind::MatthewsCorr,
        "stsb" => MetricKind::SpearmanCorr,
        "mrpc" | "qqp" => MetricKind::F1,
        _ => MetricKind::Accuracy,
    }
}

/// Settings forwarded with every request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BridgeConfig {
    pub hparams: Hyperparameters,
    /// Dataset locator; `{task}` is replaced by the task name.
    pub dataset: String,
    /// Per-task metric overrides of [`glue_metric`].
    pub task_metrics: BTreeMap<String, MetricKind>,
    /// Score every task by negated validation loss.
    pub loss_metric: bool,
    /// Per-request timeout in seconds.
    pub timeout_secs: f64,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self {
            hparams: Hyperparameters::default(),
            dataset: "{task}".into(),
            task_metrics: BTreeMap::new(),
            loss_metric: false,
            timeout_secs: 3600.0,
        }
    }
}

impl BridgeConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs.max(0.0))
    }
}

pub type Connector = Box<dyn Fn() -> Result<Session, BridgeError> + Send + Sync>;

/// Out-of-process oracle. Keeps a pool of worker sessions, one per
/// concurrent evaluation, opened on demand through `connect`.
pub struct BridgeEvaluator {
    connect: Connector,
    idle: Mutex<Vec<Session>>,
    config: BridgeConfig,
    worker: String,
    fingerprint: String,
}

impl BridgeEvaluator {
    /// Opens the first session right away to learn the worker's identity.
    pub fn new(connect: Connector, config: BridgeConfig) -> Result<Self, BridgeError> {
        let first = connect()?;
        let worker = first.worker().to_string();
        let params = serde_json::to_string(&config).expect("config serializes");
        let fingerprint = format!("bridge-{}", fingerprint::digest_str(&[&worker, &params]));
        Ok(Self { connect, idle: Mutex::new(vec![first]), config, worker, fingerprint })
    }

    /// Runs `command` through the shell for every session.
    pub fn spawn(command: String, config: BridgeConfig) -> Result<Self, BridgeError> {
        let timeout = config.timeout();
        Self::new(Box::new(move || Session::spawn(&command, timeout)), config)
    }

    pub fn worker(&self) -> &str {
        &self.worker
    }

    pub fn config(&self) -> &BridgeConfig {
        &self.config
    }

    fn checkout(&self) -> Result<Session, BridgeError> {
        let reused = {
            let mut idle = self.idle.lock().unwrap_or_else(|p| p.into_inner());
            idle.retain(Session::is_alive);
            idle.pop()
        };
        match reused {
            Some(s) => Ok(s),
            None => (self.connect)(),
        }
    }

    fn checkin(&self, session: Session) {
        if session.is_alive() {
            self.idle.lock().unwrap_or_else(|p| p.into_inner()).push(session);
        }
    }

    fn metric(&self, task: &str) -> MetricKind {
        if self.config.loss_metric {
            return MetricKind::NegValidationLoss;
        }
        self.config.task_metrics.get(task).copied().unwrap_or_else(|| glue_metric(task))
    }
}

impl Evaluator for BridgeEvaluator {
    fn fingerprint(&self) -> String {
        self.fingerprint.clone()
    }

    fn hyperparameters(&self) -> String {
        serde_json::to_string(&self.config).expect("config serializes")
    }

    fn metric_kind(&self, task: &str) -> Result<MetricKind, OracleError> {
        Ok(self.metric(task))
    }

    fn evaluate(&self, request: &EvalRequest) -> Result<Evaluation, OracleError> {
        let metric = self.metric(&request.task);
        let wire = WireRequest {
            protocol: PROTOCOL_VERSION,
            id: 0,
            task: request.task.clone(),
            dataset: self.config.dataset.replace("{task}", &request.task),
            kept: request.kept.clone(),
            seed: request.seed,
            hparams: self.config.hparams.clone(),
            metric,
        };
        let failed = |detail: String| Evaluation { metric: MetricValue::failed(metric), val_loss: None, detail: Some(detail) };
        let mut last_transport = String::new();
        // one retry, and only for transport failures
        for attempt in 0..2 {
            let session = match self.checkout() {
                Ok(s) => s,
                Err(e) => {
                    last_transport = e.to_string();
                    continue;
                }
            };
            match session.call(wire.clone()) {
                Ok(resp) => {
                    self.checkin(session);
                    return Ok(match (resp.status, resp.score) {
                        (WireStatus::Ok, Some(score)) => Evaluation {
                            metric: MetricValue::new(metric, score),
                            val_loss: resp.val_loss,
                            detail: resp.message,
                        },
                        _ => failed(resp.message.unwrap_or_else(|| "worker reported failure".into())),
                    });
                }
                Err(CallError::Rejected(m)) => {
                    self.checkin(session);
                    return Ok(failed(format!("rejected: {m}")));
                }
                Err(e @ CallError::Timeout(_)) => {
                    // the worker is still busy with it; do not queue behind it
                    session.abandon();
                    return Ok(failed(e.to_string()));
                }
                Err(CallError::Transport(m)) => {
                    log::warn!("transport failure on attempt {}: {m}", attempt + 1);
                    last_transport = m;
                }
            }
        }
        Err(OracleError::Session(last_transport))
    }
}
