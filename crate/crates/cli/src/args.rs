//! Command line grammar and dispatch.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand};
use resil_core::par::set_jobs;
use resil_learn::{MiBins, ModelKind, Target};

use crate::commands::{
    self, EvaluateOptions, FiRunOptions, GenOptions, LabelOptions, PredictOptions, TrainOptions,
};
use crate::config::apply_config;
use crate::{CliError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "resil",
    version,
    about = "Predict program resilience to single-bit faults from dynamic traces"
)]
pub struct Cli {
    /// Base seed for generation, campaigns, CV folds and bagging.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Directory for every file a command writes.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// `key = value` file supplying any flag not given on the command line.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Label every manifest entry by fault injection.
    Label(LabelArgs),
    /// Join traces with labels into the dataset file.
    Features(FeaturesArgs),
    /// Train one rate predictor.
    Train(TrainArgs),
    /// Predict rates for one trace or program without injecting faults.
    Predict(PredictArgs),
    /// Score both predictors on a labelled held-out corpus.
    Evaluate(EvaluateArgs),
    /// Fault-injection tools.
    Fi {
        #[command(subcommand)]
        command: FiCommand,
    },
    /// Corpus generation.
    Gen {
        #[command(subcommand)]
        command: GenCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum FiCommand {
    /// Run one campaign and print its rates.
    Run(FiRunArgs),
}

#[derive(Debug, Subcommand)]
pub enum GenCommand {
    /// Write seed-pinned kernels and their manifest.
    Corpus(GenCorpusArgs),
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Hang budget in dynamic instructions (default: 100x the golden run).
    #[arg(long)]
    pub budget: Option<u64>,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Consecutive self additions that count as a repeated addition.
    #[arg(long, default_value_t = resil_core::features::DEFAULT_N_SELF)]
    pub n_self: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset file (default: <out-dir>/dataset.csv).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// success or interruption.
    #[arg(long)]
    pub target: Option<Target>,
    #[arg(long, default_value_t = ModelKind::Gbrt)]
    pub kind: ModelKind,
    /// Cross-validation folds.
    #[arg(long, default_value_t = 10)]
    pub k_cv: usize,
    /// Bagged models in the final ensemble.
    #[arg(long, default_value_t = 10)]
    pub bags: usize,
    /// Mutual-information bins per axis: `sqrt` or a count.
    #[arg(long, default_value = "sqrt", value_parser = parse_mi_bins)]
    pub mi_bins: MiBins,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model_sr: Option<PathBuf>,
    #[arg(long)]
    pub model_ir: Option<PathBuf>,
    /// Trace file; repeat to predict several with one model load.
    #[arg(long, conflicts_with_all = ["program", "inputs"])]
    pub trace: Vec<PathBuf>,
    #[arg(long, requires = "inputs")]
    pub program: Option<PathBuf>,
    #[arg(long, requires = "program")]
    pub inputs: Option<PathBuf>,
    #[arg(long, default_value_t = resil_core::features::DEFAULT_N_SELF)]
    pub n_self: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model_sr: Option<PathBuf>,
    #[arg(long)]
    pub model_ir: Option<PathBuf>,
    /// Held-out manifest, already labelled into <out-dir>.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value_t = resil_core::features::DEFAULT_N_SELF)]
    pub n_self: usize,
}

#[derive(Debug, Args)]
pub struct FiRunArgs {
    #[arg(long)]
    pub program: Option<PathBuf>,
    #[arg(long)]
    pub inputs: Option<PathBuf>,
    #[arg(long, default_value_t = resil_core::fi::DEFAULT_CAMPAIGN_SIZE)]
    pub n: usize,
    #[arg(long)]
    pub budget: Option<u64>,
    /// Relative float tolerance, `exact` or `any`.
    #[arg(long, default_value = "1e-6")]
    pub tolerance: String,
}

#[derive(Debug, Args)]
pub struct GenCorpusArgs {
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    /// Campaign size written into the manifest.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value = "1e-6")]
    pub tolerance: String,
}

fn parse_mi_bins(s: &str) -> std::result::Result<MiBins, String> {
    match s {
        "sqrt" => Ok(MiBins::SqrtRows),
        n => match n.parse::<usize>() {
            Ok(b) if b >= 1 => Ok(MiBins::Fixed(b)),
            _ => Err(format!(
                "expected `sqrt` or a positive bin count, got `{n}`"
            )),
        },
    }
}

fn need<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| CliError::Usage(format!("missing --{flag}")))
}

/// Parses `argv` (program name first), merging in the config file.
pub fn parse(argv: Vec<OsString>) -> std::result::Result<Cli, clap::Error> {
    let argv = apply_config(&Cli::command(), argv)?;
    Cli::try_parse_from(argv)
}

/// Runs a parsed command line.
pub fn dispatch(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = set_jobs(jobs);
    }
    let out = cli.out_dir;
    let seed = cli.seed;
    match cli.command {
        Command::Gen {
            command: GenCommand::Corpus(a),
        } => commands::gen_corpus(&GenOptions {
            out_dir: out,
            seed,
            count: a.count,
            n: a.n,
            tolerance: a.tolerance,
        }),
        Command::Label(a) => commands::label(&LabelOptions {
            manifest: need(a.manifest, "manifest")?,
            out_dir: out,
            seed,
            budget: a.budget,
        })
        .map(|_| ()),
        Command::Features(a) => {
            commands::features(&need(a.manifest, "manifest")?, &out, seed, a.n_self).map(|_| ())
        }
        Command::Train(a) => commands::train(&TrainOptions {
            dataset: a.dataset.unwrap_or_else(|| out.join("dataset.csv")),
            target: need(a.target, "target")?,
            kind: a.kind,
            k_cv: a.k_cv,
            bags: a.bags,
            mi_bins: a.mi_bins,
            out_dir: out,
            seed,
        })
        .map(|_| ()),
        Command::Predict(a) => {
            let sources = match (a.trace.is_empty(), a.program, a.inputs) {
                (false, None, None) => a
                    .trace
                    .into_iter()
                    .map(commands::PredictSource::Trace)
                    .collect(),
                (true, Some(p), Some(i)) => vec![commands::PredictSource::Program {
                    program: p,
                    inputs: i,
                }],
                _ => {
                    return Err(CliError::Usage(
                        "give --trace, or --program with --inputs".into(),
                    ))
                }
            };
            let rows = commands::predict(&PredictOptions {
                model_sr: need(a.model_sr, "model-sr")?,
                model_ir: need(a.model_ir, "model-ir")?,
                sources,
                n_self: a.n_self,
            })?;
            print!("{}", commands::prediction_text(&rows));
            Ok(())
        }
        Command::Evaluate(a) => {
            let rows = commands::evaluate(&EvaluateOptions {
                model_sr: need(a.model_sr, "model-sr")?,
                model_ir: need(a.model_ir, "model-ir")?,
                manifest: need(a.manifest, "manifest")?,
                out_dir: out,
                seed,
                n_self: a.n_self,
            })?;
            print!("{}", crate::formats::report_table(&rows));
            Ok(())
        }
        Command::Fi {
            command: FiCommand::Run(a),
        } => {
            let row = commands::fi_run(&FiRunOptions {
                program: need(a.program, "program")?,
                inputs: need(a.inputs, "inputs")?,
                n: a.n,
                seed,
                budget: a.budget,
                tolerance: a.tolerance,
            })?;
            print!("{}", crate::formats::labels_text(&[row]));
            Ok(())
        }
    }
}

/// Full entry point; returns the process exit code.
pub fn run(argv: Vec<OsString>) -> i32 {
    let cli = match parse(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("resil: {e}");
            e.exit_code()
        }
    }
}
