//! `proofsynth`: corpus ingestion, splitting, example building, proof runs
//! and evaluation as separate subcommands with on-disk artifacts.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use proofsynth::corpus::{Fractions, SplitPolicy, Subset};
use proofsynth::generator::Temperature;

use crate::config::{Mode, UsageError};

#[derive(Parser, Debug)]
#[command(name = "proofsynth", version, about = "Whole-proof generation, checking, repair and evaluation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Parse a corpus manifest into a corpus archive.
    Ingest(IngestArgs),
    /// Split the archived corpus into train / valid / test.
    Split(SplitArgs),
    /// Write model examples for one flavor and subset.
    BuildExamples(BuildArgs),
    /// Sample, check and (optionally) repair proofs; writes record logs.
    Run(RunArgs),
    /// Proof rates, curves and topic tables from record logs.
    Eval(EvalArgs),
    /// Serve the embedded checker over the line-delimited JSON protocol.
    ServeChecker(ServeArgs),
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// Corpus manifest: one theory file path per line.
    #[arg(long)]
    corpus: PathBuf,
    /// `project: topic, ...` file; defaults to topics.txt next to the manifest.
    #[arg(long)]
    topics: Option<PathBuf>,
    /// Keep `lemmas` pseudo-theorems.
    #[arg(long)]
    keep_pseudo: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[arg(long, default_value = "theorem-wise")]
    split_policy: SplitPolicy,
    /// train,valid,test as decimals or p/q; must sum to 1.
    #[arg(long, default_value = "0.95,0.01,0.04")]
    fractions: Fractions,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FlavorArg {
    Generate,
    Context,
    Repair,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum GeneratorKind {
    Mock,
    Remote,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CheckerKind {
    Embedded,
    Remote,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TuneOn {
    Valid,
    Test,
}

#[derive(Args, Debug, Clone)]
struct GeneratorArgs {
    #[arg(long, value_enum, default_value = "mock")]
    generator: GeneratorKind,
    #[arg(long, env = "GENERATOR_URL")]
    generator_url: Option<String>,
    /// Repair model endpoint; defaults to --generator-url.
    #[arg(long)]
    repair_generator_url: Option<String>,
    #[arg(long, env = "GENERATOR_TIMEOUT_MS", default_value_t = 60_000)]
    generator_timeout_ms: u64,
    /// Mock: fraction of statements recalled exactly.
    #[arg(long, default_value_t = 0.5)]
    mock_recall: f64,
    /// Mock: fraction recalled only approximately.
    #[arg(long, default_value_t = 0.25)]
    mock_fuzzy: f64,
    /// Mock: per-step edit probability per unit of temperature.
    #[arg(long, default_value_t = 0.25)]
    mock_mutation: f64,
    #[arg(long, default_value_t = 0)]
    mock_seed: u64,
}

#[derive(Args, Debug, Clone)]
struct CheckerArgs {
    #[arg(long, value_enum, default_value = "embedded")]
    checker: CheckerKind,
    /// `host:port`, or `exec:<command>` for a subprocess on stdio.
    #[arg(long, env = "CHECKER_ADDR")]
    checker_addr: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    step_timeout_ms: u64,
    /// Optional cap on a whole proof (embedded checker only).
    #[arg(long)]
    proof_timeout_ms: Option<u64>,
}

#[derive(Args, Debug)]
struct BuildArgs {
    #[arg(long, value_enum, default_value = "generate")]
    flavor: FlavorArg,
    #[arg(long, default_value = "train")]
    subset: Subset,
    #[arg(long, default_value_t = 50)]
    max_context_statements: usize,
    #[arg(long)]
    max_input: Option<usize>,
    #[arg(long)]
    max_target: Option<usize>,
    /// Seed of the greedy sample drawn per theorem (repair flavor).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 256)]
    max_new_tokens: u32,
    #[command(flatten)]
    generator: GeneratorArgs,
    #[command(flatten)]
    checker: CheckerArgs,
    #[arg(long, default_value_t = 4)]
    parallelism: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, value_enum, default_value = "generate")]
    mode: Mode,
    /// Subsets to run on, in order.
    #[arg(long, value_delimiter = ',', default_value = "valid,test")]
    subsets: Vec<Subset>,
    /// Run directory name under <out-dir>/runs; derived from the mode by default.
    #[arg(long)]
    name: Option<String>,
    #[arg(long, default_value_t = 1)]
    n_samples: u32,
    #[arg(long)]
    temperature: Option<Temperature>,
    /// Comma-separated temperatures; without a value, 0.0 to 1.4 in steps of 0.2.
    #[arg(long, value_delimiter = ',', num_args = 0.., default_missing_value = "0.0,0.2,0.4,0.6,0.8,1.0,1.2,1.4")]
    temperature_grid: Option<Vec<Temperature>>,
    #[arg(long, default_value_t = 40)]
    top_k: u32,
    #[arg(long, default_value_t = 256)]
    max_new_tokens: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Repair rounds for iterated-repair.
    #[arg(long, default_value_t = 2)]
    rounds: u32,
    /// Stop sampling a theorem after its first success.
    #[arg(long)]
    short_circuit: bool,
    /// Repair without the checker message (ablation).
    #[arg(long)]
    no_error_message: bool,
    #[arg(long, default_value = "0.0")]
    repair_temperature: Temperature,
    #[arg(long, default_value_t = 50)]
    max_context_statements: usize,
    #[command(flatten)]
    generator: GeneratorArgs,
    #[command(flatten)]
    checker: CheckerArgs,
    #[arg(long, default_value_t = 4)]
    parallelism: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Runs to evaluate (names under <out-dir>/runs); all runs by default.
    #[arg(long, value_delimiter = ',')]
    runs: Vec<String>,
    /// Budgets for generation curves; powers of two up to n by default.
    #[arg(long, value_delimiter = ',')]
    budgets: Vec<u64>,
    /// Subset on which the per-budget temperature is chosen.
    #[arg(long, value_enum, default_value = "valid")]
    tune_on: TuneOn,
    /// Add a row for the union of all evaluated runs.
    #[arg(long)]
    ensemble: bool,
    /// Exact rational arithmetic (ratios printed as fractions).
    #[arg(long)]
    exact: bool,
    /// Defaults to <out-dir>/report.
    #[arg(long)]
    report_dir: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct ServeArgs {
    /// Address to listen on, e.g. 127.0.0.1:7878.
    #[arg(long, conflicts_with = "stdio", required_unless_present = "stdio")]
    listen: Option<String>,
    /// Serve a single session on stdin/stdout.
    #[arg(long)]
    stdio: bool,
    /// Artificial delay per proof step, for exercising timeouts.
    #[arg(long)]
    step_latency_ms: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
