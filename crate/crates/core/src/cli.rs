//! Command-line front end of the `layer-prune` binary.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure.

use crate::bridge::{BridgeConfig, BridgeEvaluator, EchoMock, Hyperparameters, Session};
use crate::metrics::{MetricKind, SplitSpec};
use crate::orchestrator::{
    load_ledger, report, run_search, EvalRequest, Evaluation, Evaluator, OracleEvaluator, ResultCache, Scheduler,
    SearchPlan,
};
use crate::prune::synthetic::AdditiveOracle;
use crate::prune::{lookup, Algorithm, OracleError, PruneLedger};
use crate::toy::{self, Checkpoint, PretrainSpec, ToyConfig, ToyOracle, TrainSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

/// Environment variable naming the directory for result journals.
pub const CACHE_DIR_ENV: &str = "LAYER_PRUNE_CACHE_DIR";

#[derive(Debug, Parser)]
#[command(name = "layer-prune", version, about = "Layer-wise pruning search for transformer encoders")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search for the layers to prune and write a ledger.
    Search(SearchArgs),
    /// Print the first X layers of a stored chain without evaluating anything.
    Lookup(LookupArgs),
    /// Measure forward latency of the toy model per depth.
    Bench(BenchArgs),
    /// Re-evaluate ledgers under several seeds and compare them.
    Report(ReportArgs),
    /// Pretrain a toy checkpoint with masked-token prediction.
    Pretrain(PretrainArgs),
    /// Serve the echo-mock evaluator on stdin/stdout.
    #[command(hide = true)]
    MockWorker(MockWorkerArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    /// Fine-tune the bundled (or a given) toy checkpoint in-process.
    Builtin,
    /// Delegate to an external worker over the wire protocol.
    Bridge,
    /// Deterministic additive scores; no training.
    Mock,
}

/// Oracle selection and scheduling; every field can also come from the
/// `--config` file.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleArgs {
    /// TOML file with defaults for any of these flags (snake_case keys).
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Evaluator to use [default: builtin].
    #[arg(long, value_enum)]
    pub oracle: Option<OracleKind>,
    /// Model depth for the bridge and mock oracles [default: 12].
    #[arg(long)]
    pub depth: Option<usize>,
    /// Toy checkpoint to prune (builtin oracle) [default: the bundled depth-6 fixture].
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Seed of the synthetic toy tasks [default: 0].
    #[arg(long)]
    pub task_seed: Option<u64>,
    /// Fine-tuning epochs [default: 3].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Fine-tuning learning rate [default: 2e-3 builtin, 2e-5 bridge].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Fine-tuning batch size [default: 32].
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Score by negated validation loss instead of the task metric.
    #[arg(long)]
    pub metric_loss: bool,
    /// Shell command that starts a wire-protocol worker (bridge oracle).
    #[arg(long)]
    pub worker_cmd: Option<String>,
    /// Unix socket of a running worker (bridge oracle).
    #[arg(long)]
    pub worker_socket: Option<PathBuf>,
    /// Dataset locator sent to the worker; `{task}` expands to the task [default: {task}].
    #[arg(long)]
    pub dataset: Option<String>,
    /// Maximum sequence length sent to the worker [default: 128].
    #[arg(long)]
    pub max_seq_len: Option<usize>,
    /// Per-request timeout for the bridge oracle, seconds [default: 3600].
    #[arg(long)]
    pub timeout_secs: Option<f64>,
    /// Seed of the mock oracle's layer weights [default: 0].
    #[arg(long)]
    pub mock_seed: Option<u64>,
    /// Artificial delay per mock evaluation, milliseconds [default: 0].
    #[arg(long)]
    pub mock_delay_ms: Option<u64>,
    /// Evaluations run at the same time [default: 1].
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// Directory for result journals (also $LAYER_PRUNE_CACHE_DIR)
    /// [default: next to the ledger].
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Pruning strategy.
    #[arg(long, value_enum)]
    pub algo: AlgoArg,
    /// Task name (builtin: unigram, order, density, bigram).
    #[arg(long)]
    pub task: String,
    /// Number of layers to prune.
    #[arg(long)]
    pub n: usize,
    /// Search seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ledger file to write; an existing ledger for the same search is resumed or extended.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub oracle: OracleArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgoArg {
    Glp,
    Top,
    Optimal,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Glp => Algorithm::Glp,
            AlgoArg::Top => Algorithm::Top,
            AlgoArg::Optimal => Algorithm::Optimal,
        }
    }
}

#[derive(Debug, Args)]
pub struct LookupArgs {
    /// Ledger written by `search`.
    #[arg(long)]
    pub ledger: PathBuf,
    /// Number of layers to prune.
    #[arg(long)]
    pub x: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Depths to measure, comma separated [default: 0 to --max-depth].
    #[arg(long, value_delimiter = ',')]
    pub depths: Vec<usize>,
    /// Depth of the benchmarked model; speedups are relative to it.
    #[arg(long, default_value_t = 12)]
    pub max_depth: usize,
    /// Sequences per forward pass.
    #[arg(long, default_value_t = 1)]
    pub batch: usize,
    /// Timed repetitions per depth.
    #[arg(long, default_value_t = 200)]
    pub repeats: usize,
    /// Seed of the random weights.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Ledgers to compare (repeat the flag); all must be for the same task.
    #[arg(long = "ledger", required = true)]
    pub ledgers: Vec<PathBuf>,
    /// Seeds to re-evaluate under, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    pub seeds: Vec<u64>,
    /// Directory for summary.csv, scores.csv and candidates.csv.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    pub oracle: OracleArgs,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    /// Where to write the checkpoint.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 6)]
    pub depth: usize,
    #[arg(long, default_value_t = 32)]
    pub width: usize,
    #[arg(long, default_value_t = 2)]
    pub heads: usize,
    #[arg(long, default_value_t = 64)]
    pub ffn: usize,
    #[arg(long, default_value_t = 1500)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct MockWorkerArgs {
    #[arg(long, default_value_t = 12)]
    pub depth: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub delay_ms: u64,
}

/// Error carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Output goes to `out`; diagnostics to stderr.
pub fn run<I, T>(args: I, out: &mut dyn std::io::Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            match &e {
                CliError::Usage(m) => eprintln!("error: {m}"),
                CliError::Runtime(m) => eprintln!("error: {m}"),
            }
            e.exit_code()
        }
    }
}

pub fn main_exit() -> ExitCode {
    let mut stdout = std::io::stdout().lock();
    ExitCode::from(run(std::env::args_os(), &mut stdout))
}

fn execute(command: Command, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let mut text = String::new();
    let result = match command {
        Command::Search(a) => cmd_search(a, &mut text),
        Command::Lookup(a) => cmd_lookup(a, &mut text),
        Command::Bench(a) => cmd_bench(a, &mut text),
        Command::Report(a) => cmd_report(a, &mut text),
        Command::Pretrain(a) => cmd_pretrain(a, &mut text),
        Command::MockWorker(a) => return cmd_mock_worker(a),
    };
    out.write_all(text.as_bytes()).map_err(runtime)?;
    result
}

impl OracleArgs {
    /// Fills unset fields from the `--config` file.
    fn resolved(&self) -> Result<OracleArgs, CliError> {
        let Some(path) = &self.config else { return Ok(self.clone()) };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let file: OracleArgs = toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        macro_rules! pick {
            ($($f:ident),*) => { OracleArgs { $($f: self.$f.clone().or(file.$f),)* metric_loss: self.metric_loss || file.metric_loss, config: self.config.clone() } };
        }
        Ok(pick!(
            oracle, depth, checkpoint, task_seed, epochs, lr, batch_size, worker_cmd, worker_socket, dataset, max_seq_len,
            timeout_secs, mock_seed, mock_delay_ms, parallelism, cache_dir
        ))
    }
}

/// Any of the three evaluator kinds behind one type.
pub enum AnyEvaluator {
    Builtin(Box<ToyOracle>),
    Bridge(BridgeEvaluator),
    Mock(OracleEvaluator<AdditiveOracle>),
}

impl Evaluator for AnyEvaluator {
    fn fingerprint(&self) -> String {
        match self {
            AnyEvaluator::Builtin(e) => Evaluator::fingerprint(e.as_ref()),
            AnyEvaluator::Bridge(e) => e.fingerprint(),
            AnyEvaluator::Mock(e) => e.fingerprint(),
        }
    }
    fn hyperparameters(&self) -> String {
        match self {
            AnyEvaluator::Builtin(e) => Evaluator::hyperparameters(e.as_ref()),
            AnyEvaluator::Bridge(e) => e.hyperparameters(),
            AnyEvaluator::Mock(e) => e.hyperparameters(),
        }
    }
    fn metric_kind(&self, task: &str) -> Result<MetricKind, OracleError> {
        match self {
            AnyEvaluator::Builtin(e) => Evaluator::metric_kind(e.as_ref(), task),
            AnyEvaluator::Bridge(e) => e.metric_kind(task),
            AnyEvaluator::Mock(e) => e.metric_kind(task),
        }
    }
    fn evaluate(&self, request: &EvalRequest) -> Result<Evaluation, OracleError> {
        match self {
            AnyEvaluator::Builtin(e) => e.evaluate(request),
            AnyEvaluator::Bridge(e) => e.evaluate(request),
            AnyEvaluator::Mock(e) => e.evaluate(request),
        }
    }
}

struct Setup {
    scheduler: Scheduler<AnyEvaluator>,
    depth: usize,
}

fn build_evaluator(o: &OracleArgs) -> Result<(AnyEvaluator, usize), CliError> {
    let kind = o.oracle.unwrap_or(OracleKind::Builtin);
    let bridge_only = o.worker_cmd.is_some() || o.worker_socket.is_some();
    if bridge_only && kind != OracleKind::Bridge {
        return Err(CliError::Usage("--worker-cmd/--worker-socket need --oracle bridge".into()));
    }
    match kind {
        OracleKind::Builtin => {
            let checkpoint = match &o.checkpoint {
                Some(p) => Checkpoint::load(p).map_err(runtime)?,
                None => Checkpoint::fixture(),
            };
            let depth = checkpoint.config.depth;
            if let Some(d) = o.depth.filter(|&d| d != depth) {
                return Err(CliError::Usage(format!(
                    "--depth {d} does not match the {depth}-layer checkpoint; pass --checkpoint (see `pretrain`)"
                )));
            }
            let defaults = TrainSpec::toy();
            let train = TrainSpec {
                epochs: o.epochs.unwrap_or(defaults.epochs),
                lr: o.lr.unwrap_or(defaults.lr),
                batch_size: o.batch_size.unwrap_or(defaults.batch_size),
                ..defaults
            };
            train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let oracle = ToyOracle::new(checkpoint, o.task_seed.unwrap_or(0), train, SplitSpec::default())
                .with_loss_metric(o.metric_loss);
            Ok((AnyEvaluator::Builtin(Box::new(oracle)), depth))
        }
        OracleKind::Mock => {
            let depth = o.depth.unwrap_or(12);
            if depth < 2 {
                return Err(CliError::Usage("--depth must be at least 2".into()));
            }
            let e = OracleEvaluator::new(AdditiveOracle::random(depth, o.mock_seed.unwrap_or(0)))
                .with_delay(Duration::from_millis(o.mock_delay_ms.unwrap_or(0)));
            Ok((AnyEvaluator::Mock(e), depth))
        }
        OracleKind::Bridge => {
            let defaults = Hyperparameters::default();
            let config = BridgeConfig {
                hparams: Hyperparameters {
                    lr: o.lr.unwrap_or(defaults.lr),
                    batch_size: o.batch_size.unwrap_or(defaults.batch_size),
                    epochs: o.epochs.unwrap_or(defaults.epochs),
                    max_seq_len: o.max_seq_len.unwrap_or(defaults.max_seq_len),
                },
                dataset: o.dataset.clone().unwrap_or_else(|| "{task}".into()),
                loss_metric: o.metric_loss,
                timeout_secs: o.timeout_secs.unwrap_or(3600.0),
                ..BridgeConfig::default()
            };
            let evaluator = match (&o.worker_cmd, &o.worker_socket) {
                (Some(cmd), None) => BridgeEvaluator::spawn(cmd.clone(), config).map_err(runtime)?,
                #[cfg(unix)]
                (None, Some(path)) => {
                    let path = path.clone();
                    let timeout = config.timeout();
                    BridgeEvaluator::new(Box::new(move || Session::connect_unix(&path, timeout)), config)
                        .map_err(runtime)?
                }
                _ => return Err(CliError::Usage("the bridge oracle needs exactly one of --worker-cmd or --worker-socket".into())),
            };
            Ok((AnyEvaluator::Bridge(evaluator), o.depth.unwrap_or(12)))
        }
    }
}

fn journal_path(o: &OracleArgs, fingerprint: &str, ledger: Option<&Path>) -> Option<PathBuf> {
    let dir = o.cache_dir.clone().or_else(|| std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from));
    match (dir, ledger) {
        (Some(d), _) => Some(d.join(format!("{fingerprint}.journal"))),
        (None, Some(l)) => {
            let mut p = l.as_os_str().to_owned();
            p.push(".journal");
            Some(PathBuf::from(p))
        }
        (None, None) => None,
    }
}

fn setup(args: &OracleArgs, ledger: Option<&Path>) -> Result<Setup, CliError> {
    let o = args.resolved()?;
    let (evaluator, depth) = build_evaluator(&o)?;
    let cache = match journal_path(&o, &evaluator.fingerprint(), ledger) {
        Some(p) => ResultCache::open(&p).map_err(runtime)?,
        None => ResultCache::in_memory(),
    };
    let parallelism = o.parallelism.unwrap_or(1);
    if parallelism == 0 {
        return Err(CliError::Usage("--parallelism must be at least 1".into()));
    }
    let scheduler = Scheduler::new(evaluator, cache, parallelism).map_err(runtime)?;
    Ok(Setup { scheduler, depth })
}

fn fmt_list(layers: &[usize]) -> String {
    let parts: Vec<String> = layers.iter().map(|l| l.to_string()).collect();
    format!("[{}]", parts.join(","))
}

fn fmt_score(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        "failed".into()
    }
}

fn write_steps(out: &mut String, ledger: &PruneLedger) {
    if ledger.steps.iter().all(|s| s.candidates.is_empty()) {
        return;
    }
    let _ = writeln!(out, "step  chosen  score     candidates (layer:score)");
    for s in &ledger.steps {
        let cands: Vec<String> = s.candidates.iter().map(|c| format!("{}:{}", c.layer, fmt_score(c.score))).collect();
        let score = s.chosen_score().map_or("-".into(), fmt_score);
        let _ = writeln!(out, "{:<5} {:<7} {:<9} {}", s.step, s.chosen, score, cands.join(" "));
    }
}

fn cmd_search(a: SearchArgs, out: &mut String) -> Result<(), CliError> {
    let Setup { scheduler, depth } = setup(&a.oracle, a.out.as_deref())?;
    if a.n >= depth {
        return Err(CliError::Usage(format!("--n {} must be smaller than the model depth {depth}", a.n)));
    }
    let metric = scheduler.evaluator().metric_kind(&a.task).map_err(|e| CliError::Usage(e.to_string()))?;
    let algorithm: Algorithm = a.algo.into();
    let plan = SearchPlan { algorithm, task: a.task.clone(), depth, n: a.n, seed: a.seed };
    let _ = writeln!(
        out,
        "{algorithm} search: task {} ({metric}), depth {depth}, n {}, seed {}, oracle {}",
        a.task,
        a.n,
        a.seed,
        scheduler.evaluator().fingerprint()
    );
    let ledger = run_search(&scheduler, &plan, a.out.as_deref()).map_err(runtime)?;
    if algorithm == Algorithm::Glp && a.n == 0 {
        let all: Vec<usize> = (0..depth).collect();
        let base = crate::prune::ScoreOracle::score(&scheduler, &all, &a.task, a.seed).map_err(runtime)?;
        let _ = writeln!(out, "baseline (all {depth} layers): {}", fmt_score(base.value));
    }
    write_steps(out, &ledger);
    if let (Some(best), Some(sub)) =
        (&ledger.optimal_pruned, ledger.subsets.iter().find(|s| Some(&s.pruned) == ledger.optimal_pruned.as_ref()))
    {
        let _ = writeln!(out, "subsets scored: {}; best {} with {}", ledger.subsets.len(), fmt_list(best), fmt_score(sub.score));
    }
    let _ = writeln!(out, "pruned: {}", fmt_list(&ledger.chain()));
    let _ = writeln!(out, "evaluations: {} (cache hits: {})", scheduler.evaluations(), scheduler.cache_hits());
    if let Some(p) = &a.out {
        let _ = writeln!(out, "ledger: {}", p.display());
    }
    Ok(())
}

fn cmd_lookup(a: LookupArgs, out: &mut String) -> Result<(), CliError> {
    let ledger = load_ledger(&a.ledger).map_err(runtime)?;
    let solution = lookup(&ledger, a.x).map_err(|e| match e {
        crate::prune::PruneError::OutOfRange { .. } => CliError::Usage(e.to_string()),
        other => runtime(other),
    })?;
    let _ = writeln!(out, "pruned: {}", fmt_list(&solution.pruned));
    for s in ledger.steps.iter().take(a.x) {
        let score = s.chosen_score().map_or("-".into(), fmt_score);
        let _ = writeln!(out, "step {}: layer {} ({} {})", s.step, s.chosen, ledger.metric, score);
    }
    if ledger.algorithm == Algorithm::Optimal && a.x > 0 {
        if let Some(sub) = ledger.subsets.iter().find(|s| s.pruned == solution.pruned) {
            let _ = writeln!(out, "{}: {}", ledger.metric, fmt_score(sub.score));
        }
    }
    let _ = writeln!(out, "evaluations: 0");
    Ok(())
}

fn cmd_bench(a: BenchArgs, out: &mut String) -> Result<(), CliError> {
    let depths: Vec<usize> = if a.depths.is_empty() { (0..=a.max_depth).collect() } else { a.depths.clone() };
    if let Some(&d) = depths.iter().find(|&&d| d > a.max_depth) {
        return Err(CliError::Usage(format!("depth {d} exceeds --max-depth {}", a.max_depth)));
    }
    let config = ToyConfig { depth: a.max_depth, ..ToyConfig::default() };
    let rows = toy::bench::forward_latency(config, &depths, a.batch, a.repeats, a.seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let _ = writeln!(out, "forward latency, batch {}, {} repeats, model depth {}", a.batch, a.repeats, a.max_depth);
    let _ = writeln!(out, "{:>5}  {:>12}  {:>8}", "depth", "median [ms]", "speedup");
    let mut csv = String::from("depth,median_ms,speedup\n");
    for r in &rows {
        let _ = writeln!(out, "{:>5}  {:>12.4}  {:>7.2}x", r.depth, r.median_ms, r.speedup);
        let _ = writeln!(csv, "{},{},{}", r.depth, r.median_ms, r.speedup);
    }
    if let Some(p) = &a.csv {
        std::fs::write(p, csv).map_err(|e| runtime(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn cmd_report(a: ReportArgs, out: &mut String) -> Result<(), CliError> {
    let ledgers = a.ledgers.iter().map(|p| load_ledger(p)).collect::<Result<Vec<_>, _>>().map_err(runtime)?;
    if let Some(l) = ledgers.iter().find(|l| l.task != ledgers[0].task) {
        return Err(CliError::Usage(format!("ledgers mix tasks {:?} and {:?}", ledgers[0].task, l.task)));
    }
    let Setup { scheduler, depth } = setup(&a.oracle, None)?;
    if let Some(l) = ledgers.iter().find(|l| l.depth != depth) {
        return Err(CliError::Usage(format!("ledger depth {} does not match the oracle's depth {depth}", l.depth)));
    }
    let fp = scheduler.evaluator().fingerprint();
    for l in ledgers.iter().filter(|l| l.oracle_fingerprint != fp) {
        log::warn!("{} ledger was searched with oracle {}; re-evaluating with {fp}", l.algorithm, l.oracle_fingerprint);
    }
    let r = report(&scheduler, &ledgers, &a.seeds).map_err(runtime)?;
    out.push_str(&r.to_table());
    if let Some(dir) = &a.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
        for (name, body) in [("summary.csv", r.summary_csv()), ("scores.csv", r.scores_csv()), ("candidates.csv", r.candidates_csv())] {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| runtime(format!("{}: {e}", p.display())))?;
        }
        let _ = writeln!(out, "\nplot data written to {}", dir.display());
    }
    Ok(())
}

fn cmd_pretrain(a: PretrainArgs, out: &mut String) -> Result<(), CliError> {
    let config = ToyConfig { depth: a.depth, width: a.width, heads: a.heads, ffn: a.ffn, ..ToyConfig::default() };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let spec = PretrainSpec { steps: a.steps, ..PretrainSpec::default() };
    let ckpt = toy::pretrain(config, &spec, a.seed).map_err(runtime)?;
    ckpt.save(&a.out).map_err(runtime)?;
    let _ = writeln!(out, "wrote {} ({} layers, hash {})", a.out.display(), config.depth, ckpt.content_hash());
    Ok(())
}

fn cmd_mock_worker(a: MockWorkerArgs) -> Result<(), CliError> {
    if a.depth == 0 {
        return Err(CliError::Usage("--depth must be positive".into()));
    }
    let mock = EchoMock::new(a.depth, a.seed).with_delay(Duration::from_millis(a.delay_ms));
    let stdin = std::io::stdin().lock();
    let stdout = std::io::stdout().lock();
    mock.serve(stdin, stdout).map(|_| ()).map_err(runtime)
}
