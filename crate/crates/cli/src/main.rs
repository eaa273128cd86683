//! `owen-explain`: budgeted Shapley/Owen attribution, exact oracles,
//! class-targeted synthesis and extraction experiments from the command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "owen-explain",
    version,
    about = "Budgeted Shapley/Owen attribution for black-box classifiers"
)]
struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true, env = "OWEN_EXPLAIN_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Partition-explainer attribution under a query budget.
    Explain(ExplainArgs),
    /// Exact Shapley, Owen or group-uniform values by enumeration.
    Oracle(OracleArgs),
    /// Synthesize a class-targeted sample.
    Synth(SynthArgs),
    /// Run the extraction simulator.
    Extract(ExtractArgs),
}

#[derive(Args, Debug, Default, Clone)]
pub struct CommonArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// linear_softmax, quadrant_bright, group_symmetric, dead_feature or additive.
    #[arg(long)]
    pub victim: Option<String>,
    #[arg(long)]
    pub num_classes: Option<usize>,
    /// Input shape, e.g. `8,8`.
    #[arg(long)]
    pub shape: Option<String>,
    /// Block extents, one for all axes or one per axis.
    #[arg(long)]
    pub block: Option<String>,
    #[arg(long, value_enum)]
    pub fill: Option<FillArg>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Baseline tensor file for `--fill baseline`.
    #[arg(long)]
    pub baseline: Option<String>,
    /// `all` or a class count.
    #[arg(long)]
    pub topk: Option<String>,
    #[arg(long, value_enum)]
    pub labels: Option<LabelsArg>,
    /// Output file (directory for `extract`).
    #[arg(long)]
    pub out: Option<String>,
    /// Write the fully resolved configuration here.
    #[arg(long)]
    pub emit_config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub tensor_format: Option<TensorFormatArg>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct InputArgs {
    /// Input tensor (binary or JSON lines).
    #[arg(long, conflicts_with = "random")]
    pub input: Option<String>,
    /// Use a seeded uniform random input.
    #[arg(long)]
    pub random: bool,
    /// `all` or a class index.
    #[arg(long)]
    pub classes: Option<String>,
}

#[derive(Args, Debug)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: InputArgs,
    /// Evaluation budget per explanation, or `unlimited`.
    #[arg(long)]
    pub max_evals: Option<String>,
    #[arg(long, value_enum)]
    pub order: Option<OrderArg>,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(value_enum)]
    pub method: OracleMethod,
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: InputArgs,
    /// Atom groups, e.g. `0,1|2,3`.
    #[arg(long)]
    pub groups: Option<String>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// `start:end:max_evals,...`
    #[arg(long)]
    pub schedule: Option<String>,
    #[arg(long, value_enum)]
    pub after_end: Option<AfterEndArg>,
    #[arg(long)]
    pub min_max_evals: Option<u64>,
    #[arg(long)]
    pub target_class: Option<usize>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub mutation_rate: Option<f64>,
    #[arg(long)]
    pub mutation_scale: Option<f64>,
    /// Victim query budget for the run.
    #[arg(long)]
    pub budget: Option<u64>,
    /// Trace CSV (default `<out>.trace.csv`).
    #[arg(long)]
    pub trace: Option<String>,
    #[arg(long, value_enum)]
    pub order: Option<OrderArg>,
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub samples_per_class: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub n_probe: Option<usize>,
    #[arg(long)]
    pub schedule: Option<String>,
    #[arg(long)]
    pub min_max_evals: Option<u64>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum FillArg {
    Blur,
    Mean,
    Baseline,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum LabelsArg {
    Soft,
    Hard,
    All,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum OrderArg {
    Priority,
    Bfs,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum OracleMethod {
    Shapley,
    Owen,
    GroupUniform,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum AfterEndArg {
    FreezeShap,
    HoldLast,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum ModeArg {
    Guided,
    Random,
    Both,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum TensorFormatArg {
    Binary,
    Jsonl,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    let result = match cli.command {
        Command::Explain(a) => commands::explain(a),
        Command::Oracle(a) => commands::oracle(a),
        Command::Synth(a) => commands::synth(a),
        Command::Extract(a) => commands::extract(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
