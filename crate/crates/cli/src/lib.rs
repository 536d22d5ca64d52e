//! `notescreen` command-line driver.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use notescreen_core::experiment::SweepKind;
use notescreen_core::Exec;

pub mod commands;
pub mod config;
pub mod error;

pub use error::CliError;

use commands::*;
use config::{resolve, run_dir};

#[derive(Debug, Parser)]
#[command(name = "notescreen", version, about = "Epilepsy vs PNES note screening")]
pub struct Cli {
    /// JSON config file; command-line flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run directory (default: a fresh directory under $NOTESCREEN_RUNS_DIR or ./runs).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Disable data parallelism.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a CSV/JSONL cohort and write it as JSONL.
    Ingest(IngestArgs),
    /// Stratified train/validation/test split.
    Split(SplitArgs),
    /// Generate a synthetic cohort with planted evidence sentences.
    Synth(SynthArgs),
    /// Train a classifier and write a checkpoint.
    Train(TrainArgs),
    /// AUC and accuracy with bootstrap intervals.
    Eval(EvalArgs),
    /// Sentence attributions and accumulated category scores.
    Explain(ExplainArgs),
    /// Imbalance, training-ratio or scale sweep.
    Experiment(ExperimentArgs),
    /// Run the clinician review service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
}

fn parse_ratios(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|v: Vec<f64>| format!("expected three comma-separated weights, got {}", v.len()))
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    cohort: Option<PathBuf>,
    /// Train,validation,test weights, e.g. 7,1,2.
    #[arg(long, value_parser = parse_ratios)]
    ratios: Option<[f64; 3]>,
    #[arg(long)]
    seed: Option<u64>,
    /// Plain random split instead of per-label apportionment.
    #[arg(long)]
    no_stratify: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    epilepsy_frac: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    hard: bool,
    #[arg(long)]
    signal_strength: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// full, lora or qlora.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Model seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ModelArgs {
    fn to_value(&self) -> Value {
        json!({"mode": self.mode, "epochs": self.epochs, "lr": self.lr, "seed": self.seed})
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    cohort: Option<PathBuf>,
    /// Split manifest from `split`.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, value_parser = parse_ratios)]
    ratios: Option<[f64; 3]>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    cohort: Option<PathBuf>,
    #[arg(long)]
    split: Option<PathBuf>,
    /// all, train, val or test.
    #[arg(long)]
    partition: Option<String>,
    #[arg(long)]
    n_boot: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    cohort: Option<PathBuf>,
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long)]
    partition: Option<String>,
    #[arg(long)]
    limit: Option<usize>,
    /// Quadrature steps.
    #[arg(long)]
    m: Option<usize>,
    /// Sentences accumulated per category.
    #[arg(long)]
    k: Option<usize>,
    /// epilepsy, pnes or predicted.
    #[arg(long)]
    target: Option<String>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// imbalance, ratio or scale.
    #[arg(long)]
    kind: Option<SweepKind>,
    /// Comma-separated sweep values.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    #[arg(long)]
    cohort: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    hard: bool,
    #[arg(long, value_parser = parse_ratios)]
    ratios: Option<[f64; 3]>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    n_boot: Option<usize>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    host: Option<String>,
    #[arg(long)]
    port: Option<u16>,
    /// Cohort file to register (repeatable).
    #[arg(long)]
    cohort: Vec<PathBuf>,
    #[arg(long)]
    attributions: Option<PathBuf>,
    #[arg(long)]
    log: Option<PathBuf>,
}

fn flag(b: bool) -> Option<bool> {
    b.then_some(true)
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Ingest(_) => "ingest",
            Self::Split(_) => "split",
            Self::Synth(_) => "synth",
            Self::Train(_) => "train",
            Self::Eval(_) => "eval",
            Self::Explain(_) => "explain",
            Self::Experiment(_) => "experiment",
            Self::Serve(_) => "serve",
        }
    }

    /// Flag values as a JSON overlay; unset flags are null and do not override.
    fn overlay(&self) -> Value {
        match self {
            Self::Ingest(a) => json!({"input": a.input, "format": a.format}),
            Self::Split(a) => json!({
                "cohort": a.cohort, "ratios": a.ratios, "seed": a.seed,
                "stratify": a.no_stratify.then_some(false),
            }),
            Self::Synth(a) => json!({
                "n": a.n, "epilepsy_fraction": a.epilepsy_frac, "seed": a.seed,
                "hard": flag(a.hard), "signal_strength": a.signal_strength,
            }),
            Self::Train(a) => json!({
                "cohort": a.cohort, "split": a.split, "ratios": a.ratios,
                "split_seed": a.split_seed, "train": a.model.to_value(),
            }),
            Self::Eval(a) => json!({
                "checkpoint": a.checkpoint, "cohort": a.cohort, "split": a.split,
                "partition": a.partition, "n_boot": a.n_boot, "seed": a.seed,
            }),
            Self::Explain(a) => json!({
                "checkpoint": a.checkpoint, "cohort": a.cohort, "split": a.split,
                "partition": a.partition, "limit": a.limit,
                "explain": {"m_steps": a.m, "k": a.k, "target": a.target},
            }),
            Self::Experiment(a) => json!({
                "kind": a.kind, "values": a.values, "cohort": a.cohort,
                "synth": {"n": a.n, "hard": flag(a.hard)},
                "ratios": a.ratios, "split_seed": a.split_seed, "n_boot": a.n_boot,
                "train": a.model.to_value(),
            }),
            Self::Serve(a) => json!({
                "host": a.host, "port": a.port,
                "cohort": (!a.cohort.is_empty()).then_some(&a.cohort),
                "attributions": a.attributions, "log": a.log,
            }),
        }
    }
}

/// Runs one command; returns the run directory and a one-line summary.
pub fn run(cli: &Cli) -> Result<(PathBuf, String), CliError> {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    let file = cli.config.as_deref();
    let flags = cli.command.overlay();
    let name = cli.command.name();
    // resolve before creating the run directory so usage errors leave no trace
    macro_rules! go {
        ($ty:ty, |$cfg:ident, $dir:ident| $body:expr) => {{
            let $cfg: $ty = resolve(file, flags)?;
            let $dir = run_dir(cli.out.as_deref(), name)?;
            let msg = $body?;
            Ok(($dir, msg))
        }};
    }
    match &cli.command {
        Command::Ingest(_) => go!(IngestConfig, |c, d| ingest_cmd(&c, &d)),
        Command::Split(_) => go!(SplitConfig, |c, d| split_cmd(&c, &d)),
        Command::Synth(_) => go!(SynthCmdConfig, |c, d| synth_cmd(&c, &d)),
        Command::Train(_) => go!(TrainCmdConfig, |c, d| train_cmd(&c, &d, exec)),
        Command::Eval(_) => go!(EvalConfig, |c, d| eval_cmd(&c, &d, exec)),
        Command::Explain(_) => go!(ExplainCmdConfig, |c, d| explain_cmd(&c, &d, exec)),
        Command::Experiment(_) => go!(ExperimentConfig, |c, d| experiment_cmd(&c, &d, exec)),
        Command::Serve(_) => go!(ServeConfig, |c, d| serve_cmd(&c, &d)),
    }
}
