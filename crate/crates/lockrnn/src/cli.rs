//! Subcommands. Every argument struct is also the run configuration echoed
//! into the artifacts it produces, so a report can be replayed.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lockrnn_core::attacks::{
    attack_input, attack_key, attack_output, AttackReport, KeyAttackConfig, KeyOptConfig,
    OracleBudget, PredictConfig, SurrogateConfig, ThreatModel,
};
use lockrnn_core::bits::BitVector;
use lockrnn_core::drnn::{
    train, LstmNetwork, NetShape, Schedule, Selection, TrainConfig, TrainOutcome,
};
use lockrnn_core::locking::{apply_key, equiv_check, lock_random, LockedNetlist};
use lockrnn_core::netlist::Netlist;
use lockrnn_core::rng::derive_seed;
use lockrnn_core::simulator::{brute_force_keys, gen_io_table, IoTable, Simulator};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::io;
use crate::sweep::{self, SweepAxis, SweepBase, SweepResult, SweepSpec};

#[derive(Debug, Parser)]
#[command(name = "lockrnn", version, about = "Logic locking and recurrent-network attack workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Insert XOR/XNOR key gates into a netlist.
    Lock(LockArgs),
    /// Evaluate a netlist on given stimuli.
    Simulate(SimulateArgs),
    /// Generate a random stimulus/response table.
    Gendata(GendataArgs),
    /// Train an LSTM regressor on a table.
    Train(TrainArgs),
    /// Recover the key of a locked netlist from an oracle table.
    AttackKey(AttackKeyArgs),
    /// Predict responses from stimuli without the key.
    AttackOutput(PredictArgs),
    /// Predict stimuli from responses without the key.
    AttackInput(PredictArgs),
    /// Score every key against an oracle table.
    Bruteforce(BruteforceArgs),
    /// Run a grid of key attacks.
    Sweep(SweepArgs),
    /// Re-run the configuration embedded in a report and compare metrics.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct LockArgs {
    #[arg(long)]
    pub netlist: PathBuf,
    #[arg(long)]
    pub key_width: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Locked netlist output.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub key_out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub netlist: PathBuf,
    /// Key file; the netlist is activated with it first.
    #[arg(long)]
    pub key: Option<PathBuf>,
    /// A stimulus as a 0/1 string, input 0 first. Repeatable.
    #[arg(long = "vector")]
    pub vectors: Vec<String>,
    /// File with one stimulus per line.
    #[arg(long)]
    pub vectors_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GendataArgs {
    #[arg(long)]
    pub netlist: PathBuf,
    #[arg(long)]
    pub key: Option<PathBuf>,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionArg {
    BestDev,
    Final,
}

/// Network and optimizer knobs shared by training commands.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct NetArgs {
    #[arg(long, default_value_t = 128)]
    pub hidden: usize,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub layers: u8,
    #[arg(long, default_value_t = 8)]
    pub chunk_width: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = TrainConfig::default().momentum)]
    pub momentum: f64,
    /// Per-epoch learning-rate decay factor; constant rate when absent.
    #[arg(long)]
    pub decay: Option<f64>,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    pub batch_size: usize,
    #[arg(long, default_value_t = TrainConfig::default().max_epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().patience)]
    pub patience: usize,
    #[arg(long, default_value_t = TrainConfig::default().dev_fraction)]
    pub dev_fraction: f64,
    #[arg(long, value_enum, default_value_t = SelectionArg::BestDev)]
    pub selection: SelectionArg,
    #[arg(long)]
    pub target_mse: Option<f64>,
    /// Seeds weight initialization and, derived, the training shuffles.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl NetArgs {
    pub fn hidden_widths(&self) -> Vec<usize> {
        vec![self.hidden; usize::from(self.layers)]
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            max_epochs: self.epochs,
            patience: self.patience,
            dev_fraction: self.dev_fraction,
            schedule: self.decay.map_or(Schedule::Constant, |factor| Schedule::Decay { factor }),
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            batch_size: self.batch_size,
            seed: derive_seed(self.seed, 1),
            selection: match self.selection {
                SelectionArg::BestDev => Selection::BestDev,
                SelectionArg::Final => Selection::Final,
            },
            target_train_mse: self.target_mse,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub table: PathBuf,
    #[command(flatten)]
    pub net: NetArgs,
    /// Continue from these weights instead of a fresh initialization.
    #[arg(long)]
    pub init_model: Option<PathBuf>,
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    #[arg(long)]
    pub history_out: Option<PathBuf>,
    #[arg(long)]
    pub report_out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BudgetArgs {
    /// Oracle budget as a fraction of the 2^inputs stimulus space.
    #[arg(long, default_value_t = 0.005)]
    pub budget_fraction: f64,
    /// Absolute oracle budget in rows; overrides the fraction.
    #[arg(long)]
    pub budget_rows: Option<usize>,
}

impl BudgetArgs {
    pub fn budget(&self) -> OracleBudget {
        self.budget_rows
            .map_or(OracleBudget::Fraction(self.budget_fraction), OracleBudget::Rows)
    }
}

/// Key-attack knobs shared by `attack-key` and `sweep`.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct KeyKnobs {
    #[arg(long, default_value_t = KeyOptConfig::default().restarts)]
    pub restarts: usize,
    #[arg(long, default_value_t = KeyOptConfig::default().epochs)]
    pub key_epochs: usize,
    #[arg(long, default_value_t = KeyOptConfig::default().learning_rate)]
    pub key_learning_rate: f64,
    #[arg(long, default_value_t = KeyOptConfig::default().momentum)]
    pub key_momentum: f64,
    #[arg(long, default_value_t = KeyOptConfig::default().batch_size)]
    pub key_batch_size: usize,
    #[arg(long, default_value_t = KeyOptConfig::default().stable_epochs)]
    pub stable_epochs: usize,
    #[arg(long, default_value_t = KeyAttackConfig::default().holdout_fraction)]
    pub holdout_fraction: f64,
    #[arg(long, default_value_t = SurrogateConfig::default().rows)]
    pub surrogate_rows: usize,
    #[arg(long, default_value_t = SurrogateConfig::default().hidden[0])]
    pub surrogate_hidden: usize,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub surrogate_layers: u8,
    #[arg(long, default_value_t = SurrogateConfig::default().chunk_width)]
    pub surrogate_chunk_width: usize,
    #[arg(long, default_value_t = SurrogateConfig::default().train.max_epochs)]
    pub surrogate_epochs: usize,
    #[arg(long, default_value_t = SurrogateConfig::default().train.patience)]
    pub surrogate_patience: usize,
    #[arg(long, default_value_t = SurrogateConfig::default().train.batch_size)]
    pub surrogate_batch_size: usize,
    #[arg(long, default_value_t = SurrogateConfig::default().train.learning_rate)]
    pub surrogate_learning_rate: f64,
    #[arg(long, default_value_t = SurrogateConfig::default().train.momentum)]
    pub surrogate_momentum: f64,
    #[arg(long, default_value_t = SurrogateConfig::default().train.dev_fraction)]
    pub surrogate_dev_fraction: f64,
}

impl KeyKnobs {
    pub fn config(&self, seed: u64) -> KeyAttackConfig {
        let base = SurrogateConfig::default();
        KeyAttackConfig {
            surrogate: SurrogateConfig {
                rows: self.surrogate_rows,
                hidden: vec![self.surrogate_hidden; usize::from(self.surrogate_layers)],
                chunk_width: self.surrogate_chunk_width,
                train: TrainConfig {
                    max_epochs: self.surrogate_epochs,
                    patience: self.surrogate_patience,
                    dev_fraction: self.surrogate_dev_fraction,
                    learning_rate: self.surrogate_learning_rate,
                    momentum: self.surrogate_momentum,
                    batch_size: self.surrogate_batch_size,
                    ..base.train
                },
            },
            optimize: KeyOptConfig {
                restarts: self.restarts,
                epochs: self.key_epochs,
                learning_rate: self.key_learning_rate,
                momentum: self.key_momentum,
                batch_size: self.key_batch_size,
                stable_epochs: self.stable_epochs,
            },
            holdout_fraction: self.holdout_fraction,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct AttackKeyArgs {
    /// Locked netlist (structure only is used by the attack).
    #[arg(long)]
    pub locked: PathBuf,
    /// Oracle table from the activated circuit.
    #[arg(long)]
    pub table: PathBuf,
    /// Correct key, for reporting bit agreement after the attack.
    #[arg(long)]
    pub true_key: Option<PathBuf>,
    #[command(flatten)]
    pub knobs: KeyKnobs,
    #[command(flatten)]
    pub budget: BudgetArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub report_out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct PredictArgs {
    /// Netlist whose functional pins the table uses (locked or not).
    #[arg(long)]
    pub netlist: PathBuf,
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long, default_value_t = 512)]
    pub train_rows: usize,
    #[command(flatten)]
    pub net: NetArgs,
    #[command(flatten)]
    pub budget: BudgetArgs,
    #[arg(long)]
    pub report_out: PathBuf,
    /// Per-pin (real, predicted) averages as CSV.
    #[arg(long)]
    pub pins_out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BruteforceArgs {
    #[arg(long)]
    pub locked: PathBuf,
    #[arg(long)]
    pub table: PathBuf,
    /// Keep only the best N keys.
    #[arg(long)]
    pub top: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub axis: SweepAxis,
    /// Comma-separated grid points.
    #[arg(long, value_delimiter = ',', required = true)]
    pub points: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    pub repetitions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed_base: u64,
    #[arg(long)]
    pub locked: PathBuf,
    /// Correct key, used to answer oracle queries.
    #[arg(long)]
    pub true_key: PathBuf,
    /// Oracle rows for axes other than training size.
    #[arg(long, default_value_t = 512)]
    pub oracle_rows: usize,
    /// Fresh stimuli on which recovered keys are scored.
    #[arg(long, default_value_t = 2048)]
    pub eval_rows: usize,
    #[command(flatten)]
    pub knobs: KeyKnobs,
    #[command(flatten)]
    pub budget: BudgetArgs,
    /// Worker threads (default: environment, then available cores).
    #[arg(long, env = sweep::WORKERS_ENV)]
    #[serde(skip)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub summary_out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    #[arg(long)]
    pub report: PathBuf,
}

/// A JSON artifact: the producing command and its result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport<T> {
    pub tool_version: String,
    pub run_config: Command,
    pub result: T,
}

impl<T> RunReport<T> {
    fn new(cmd: &Command, result: T) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            run_config: cmd.clone(),
            result,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub shape: NetShape,
    pub config: TrainConfig,
    pub initial_dev_mse: f64,
    pub best_epoch: usize,
    pub best_dev_mse: f64,
    pub history: Vec<lockrnn_core::drnn::EpochRecord>,
    pub wall_clock_seconds: f64,
}

/// Run configuration for artifacts that cannot embed it.
fn write_sidecar(path: &Path, cmd: &Command) -> Result<(), CliError> {
    let mut p = path.as_os_str().to_owned();
    p.push(".run.json");
    io::write_json(Path::new(&p), &RunReport::new(cmd, ()))
}

fn load_locked(path: &Path) -> Result<LockedNetlist, CliError> {
    Ok(LockedNetlist::from_netlist(io::read_netlist(path)?)?)
}

/// The netlist to simulate: activated with `key` when given.
fn activated(path: &Path, key: Option<&Path>) -> Result<Netlist, CliError> {
    let n = io::read_netlist(path)?;
    match key {
        None => Ok(n),
        Some(k) => {
            let locked = LockedNetlist::from_netlist(n)?;
            Ok(apply_key(&locked, &io::read_key(k)?)?)
        }
    }
}

/// Runs one command and returns its one-line summary.
pub fn run(cmd: &Command) -> Result<String, CliError> {
    match cmd {
        Command::Lock(a) => cmd_lock(cmd, a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Gendata(a) => cmd_gendata(cmd, a),
        Command::Train(a) => {
            let report = compute_train(a)?;
            let summary = format!(
                "trained {} epochs; best dev MSE {:.6} at epoch {}",
                report.history.len(),
                report.best_dev_mse,
                report.best_epoch
            );
            if let Some(p) = &a.report_out {
                io::write_json(p, &RunReport::new(cmd, &report))?;
            }
            Ok(summary)
        }
        Command::AttackKey(a) => {
            let report = compute_attack_key(a)?;
            io::write_json(&a.report_out, &RunReport::new(cmd, &report))?;
            Ok(format!(
                "key {} held-out match rate {:.4}",
                report.key.as_deref().unwrap_or("?"),
                report.match_rate
            ))
        }
        Command::AttackOutput(a) | Command::AttackInput(a) => {
            let inverse = matches!(cmd, Command::AttackInput(_));
            let report = compute_predict(a, inverse)?;
            io::write_json(&a.report_out, &RunReport::new(cmd, &report))?;
            if let Some(p) = &a.pins_out {
                io::write_atomic(p, &io::pins_csv(&report.pins)?)?;
                write_sidecar(p, cmd)?;
            }
            Ok(format!(
                "bit accuracy {:.4}, exact rows {:.4} over {} held-out rows",
                report.bit_accuracy.unwrap_or(0.0),
                report.match_rate,
                report.holdout_rows
            ))
        }
        Command::Bruteforce(a) => cmd_bruteforce(cmd, a),
        Command::Sweep(a) => {
            let result = compute_sweep(a)?;
            io::write_atomic(&a.out, &sweep::cells_csv(a.axis, &result.cells)?)?;
            write_sidecar(&a.out, cmd)?;
            if let Some(p) = &a.summary_out {
                io::write_json(p, &RunReport::new(cmd, &result.summary))?;
            }
            let failed = result.cells.iter().filter(|c| c.status != "ok").count();
            Ok(format!("{} cells, {failed} failed", result.cells.len()))
        }
        Command::Replay(a) => replay(&a.report).map(|_| "metrics reproduced".to_owned()),
    }
}

fn cmd_lock(cmd: &Command, a: &LockArgs) -> Result<String, CliError> {
    let n = io::read_netlist(&a.netlist)?;
    let (locked, key) = lock_random(&n, a.key_width, a.seed)?;
    let check = equiv_check(&apply_key(&locked, &key)?, &n, 4096, a.seed)?;
    if !check.is_equal() {
        return Err(CliError::Config("locked netlist is not equivalent under its key".into()));
    }
    let name = format!("{}_k{}", n.name(), a.key_width);
    io::write_netlist(&a.out, &locked.netlist().clone().with_name(name))?;
    io::write_key(&a.key_out, &key)?;
    write_sidecar(&a.out, cmd)?;
    Ok(format!("locked {} with a {}-bit key", n.name(), a.key_width))
}

fn cmd_simulate(a: &SimulateArgs) -> Result<String, CliError> {
    let n = activated(&a.netlist, a.key.as_deref())?;
    let mut vectors = a.vectors.clone();
    if let Some(f) = &a.vectors_file {
        vectors.extend(
            io::read_text(f)?
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_owned),
        );
    }
    let xs = vectors
        .iter()
        .map(|v| BitVector::parse01(v))
        .collect::<Result<Vec<_>, _>>()?;
    let ys = Simulator::new(&n).eval_batch(&xs)?;
    let lines: Vec<String> = xs.iter().zip(&ys).map(|(x, y)| format!("{x} {y}")).collect();
    Ok(lines.join("\n"))
}

fn cmd_gendata(cmd: &Command, a: &GendataArgs) -> Result<String, CliError> {
    let n = activated(&a.netlist, a.key.as_deref())?;
    let t = gen_io_table(&n, a.count, a.seed)?;
    io::write_table(&a.out, &t)?;
    write_sidecar(&a.out, cmd)?;
    Ok(format!("{} rows written", t.len()))
}

fn cmd_bruteforce(cmd: &Command, a: &BruteforceArgs) -> Result<String, CliError> {
    let locked = load_locked(&a.locked)?;
    let table = io::read_table(&a.table)?;
    let scores = brute_force_keys(&locked, &table)?;
    let keep = a.top.unwrap_or(scores.len()).min(scores.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    let enc = |e: csv::Error| CliError::Config(format!("csv encoding: {e}"));
    w.write_record(["key", "match_rate"]).map_err(enc)?;
    for s in &scores[..keep] {
        w.write_record([s.key.bits().to_string01(), s.match_rate.to_string()])
            .map_err(enc)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Config(format!("csv encoding: {e}")))?;
    io::write_atomic(&a.out, &bytes)?;
    write_sidecar(&a.out, cmd)?;
    let perfect = scores.iter().filter(|s| s.match_rate == 1.0).count();
    Ok(format!("{} keys scored, {perfect} reproduce every row", scores.len()))
}

fn seconds_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

pub fn compute_train(a: &TrainArgs) -> Result<TrainReport, CliError> {
    let table: IoTable = io::read_table(&a.table)?;
    let start = Instant::now();
    let net = match &a.init_model {
        Some(p) => io::read_model(p)?,
        None => LstmNetwork::new(
            NetShape::new(table.input_width(), table.output_width(), &a.net.hidden_widths(), a.net.chunk_width),
            a.net.seed,
        )?,
    };
    let cfg = a.net.train_config();
    let out: TrainOutcome = train(net, &table, &cfg)?;
    if let Some(p) = &a.model_out {
        io::write_model(p, &out.net)?;
    }
    if let Some(p) = &a.history_out {
        io::write_atomic(p, &io::history_csv(&out.history)?)?;
    }
    Ok(TrainReport {
        shape: out.net.shape().clone(),
        config: cfg,
        initial_dev_mse: out.initial_dev_mse,
        best_epoch: out.best_epoch,
        best_dev_mse: out.best_dev_mse,
        history: out.history,
        wall_clock_seconds: seconds_since(start),
    })
}

pub fn compute_attack_key(a: &AttackKeyArgs) -> Result<AttackReport, CliError> {
    let locked = load_locked(&a.locked)?;
    let oracle = io::read_table(&a.table)?;
    let start = Instant::now();
    let tm = ThreatModel::new(&locked, oracle, a.budget.budget())?;
    let mut report = attack_key(&tm, &a.knobs.config(a.seed))?;
    report.wall_clock_seconds = seconds_since(start);
    if let Some(k) = &a.true_key {
        report = report.with_key_truth(&io::read_key(k)?)?;
    }
    Ok(report)
}

pub fn compute_predict(a: &PredictArgs, inverse: bool) -> Result<AttackReport, CliError> {
    let locked = load_locked(&a.netlist)?;
    let oracle = io::read_table(&a.table)?;
    let start = Instant::now();
    let tm = ThreatModel::new(&locked, oracle, a.budget.budget())?;
    let cfg = PredictConfig {
        train_rows: a.train_rows,
        hidden: a.net.hidden_widths(),
        chunk_width: a.net.chunk_width,
        train: a.net.train_config(),
        seed: a.net.seed,
    };
    let mut report = if inverse {
        attack_input(&tm, &cfg)?
    } else {
        attack_output(&tm, &cfg)?
    };
    report.wall_clock_seconds = seconds_since(start);
    Ok(report)
}

pub fn compute_sweep(a: &SweepArgs) -> Result<SweepResult, CliError> {
    let spec = SweepSpec {
        axis: a.axis,
        points: a.points.clone(),
        repetitions: a.repetitions,
        seed_base: a.seed_base,
    };
    spec.validate()?;
    let locked = load_locked(&a.locked)?.with_correct_key(io::read_key(&a.true_key)?)?;
    let base = SweepBase {
        locked,
        attack: a.knobs.config(a.seed_base),
        oracle_rows: a.oracle_rows,
        eval_rows: a.eval_rows,
        budget: a.budget.budget(),
        workers: a.workers.unwrap_or_else(sweep::default_workers),
    };
    sweep::run_sweep(&spec, &base)
}

/// Removes wall-clock fields so metric trees can be compared exactly.
fn strip_clock(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(m) => {
            m.remove("wall_clock_seconds");
            m.values_mut().for_each(strip_clock);
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(strip_clock),
        _ => {}
    }
}

fn to_value<T: Serialize>(t: &T) -> Result<serde_json::Value, CliError> {
    serde_json::to_value(t).map_err(|e| CliError::Config(format!("json encoding: {e}")))
}

/// Re-runs the configuration stored in a JSON report and checks that every
/// metric except wall-clock time comes out identical.
pub fn replay(path: &Path) -> Result<(), CliError> {
    let stored: RunReport<serde_json::Value> = io::read_json(path)?;
    let fresh = match &stored.run_config {
        Command::AttackKey(a) => to_value(&compute_attack_key(a)?)?,
        Command::AttackOutput(a) => to_value(&compute_predict(a, false)?)?,
        Command::AttackInput(a) => to_value(&compute_predict(a, true)?)?,
        Command::Train(a) => {
            let a = TrainArgs {
                model_out: None,
                history_out: None,
                report_out: None,
                ..a.clone()
            };
            to_value(&compute_train(&a)?)?
        }
        Command::Sweep(a) => to_value(&compute_sweep(a)?.summary)?,
        other => {
            return Err(CliError::Config(format!(
                "reports of `{}` cannot be replayed",
                serde_json::to_value(other)
                    .ok()
                    .and_then(|v| v.get("command").and_then(|c| c.as_str().map(str::to_owned)))
                    .unwrap_or_default()
            )))
        }
    };
    let (mut a, mut b) = (stored.result, fresh);
    strip_clock(&mut a);
    strip_clock(&mut b);
    let mut fields = Vec::new();
    diff_paths(&a, &b, "result", &mut fields);
    if fields.is_empty() {
        Ok(())
    } else {
        Err(CliError::ReplayMismatch {
            path: path.to_owned(),
            fields,
        })
    }
}

/// Collects the JSON paths at which `a` and `b` differ.
fn diff_paths(a: &serde_json::Value, b: &serde_json::Value, at: &str, out: &mut Vec<String>) {
    use serde_json::Value;
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            for (k, va) in x {
                match y.get(k) {
                    Some(vb) => diff_paths(va, vb, &format!("{at}.{k}"), out),
                    None => out.push(format!("{at}.{k}")),
                }
            }
            out.extend(y.keys().filter(|k| !x.contains_key(*k)).map(|k| format!("{at}.{k}")));
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => {
            for (i, (va, vb)) in x.iter().zip(y).enumerate() {
                diff_paths(va, vb, &format!("{at}[{i}]"), out);
            }
        }
        _ if a != b => out.push(at.to_owned()),
        _ => {}
    }
}
