//! Command-line driver for the concept-embedding annotation pipeline.
//!
//! `run` executes every stage for every trial of a config; the stage
//! subcommands (`ingest`, `split`, `train-ce`, `embed`, `build-store`,
//! `train-im`, `predict`, `evaluate`) operate on one trial of an existing
//! artifact tree. Exit codes: 0 success, 1 configuration error, 2 stage
//! failure, 3 partial success (some trials failed).

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cezsl::corpus::SplitPlan;
use cezsl::error::Error;
use cezsl::evaluation::{aggregate, compute_trial_metrics, RankedScores};
use cezsl::experiment::{
    error_free_upper_bound, run_experiment, ExperimentConfig, RunOptions, Stage, TrialRunner,
};

#[derive(Parser)]
#[command(name = "cezsl", about = "Concept-embedding multi-label zero-shot annotation")]
struct Cli {
    /// Emit errors as machine-readable JSON on stderr.
    #[arg(long, global = true)]
    json_errors: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StageArgs {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to the config's output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trial index to operate on.
    #[arg(long, default_value_t = 0)]
    trial: usize,
    /// Base seed override.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full experiment: all stages, all trials, aggregated report.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run a single trial instead of all trials.
        #[arg(long)]
        trial: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Run a single named stage for one trial.
        #[arg(long)]
        stage: Option<String>,
        /// Replace predicted targets with ground-truth compressed targets.
        #[arg(long)]
        error_free: bool,
    },
    /// Load and validate the corpus and instance features.
    Ingest(StageArgs),
    /// Generate the label partition and document split plan.
    Split(StageArgs),
    /// Build semantics features and train the embedding model.
    TrainCe(StageArgs),
    /// Emit concept embeddings for the semantics documents.
    Embed(StageArgs),
    /// Build the concept store over semantics and training documents.
    BuildStore(StageArgs),
    /// Compute regression targets and train the instance mapper.
    TrainIm(StageArgs),
    /// Predict targets for the test documents and rank all labels.
    Predict(StageArgs),
    /// Score predictions; standalone fixture files are also accepted.
    Evaluate {
        #[command(flatten)]
        stage: StageArgs,
        /// Ranked-score fixture (JSON array of per-instance rankings).
        #[arg(long, requires = "truth", requires = "split")]
        scores: Option<PathBuf>,
        /// Ground-truth corpus for the fixture (line-delimited JSON).
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Split plan naming the label partition for the fixture.
        #[arg(long)]
        split: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            report_error(&e, cli.json_errors);
            match e {
                Error::Config(_) | Error::Parse { .. } => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn report_error(error: &Error, json: bool) {
    if json {
        let stage = match error {
            Error::Stage { stage, .. } => Some(stage.clone()),
            _ => None,
        };
        let payload = serde_json::json!({
            "error": {
                "stage": stage,
                "message": error.to_string(),
            }
        });
        eprintln!("{payload}");
    } else {
        eprintln!("error: {error}");
    }
}

fn dispatch(command: &Command) -> Result<ExitCode, Error> {
    match command {
        Command::Run {
            config,
            out,
            trial,
            seed,
            stage,
            error_free,
        } => {
            let config = ExperimentConfig::load(config)?;
            if let Some(name) = stage {
                let stage = Stage::from_name(name)
                    .ok_or_else(|| Error::Config(format!("unknown stage '{name}'")))?;
                return run_single_stage(&config, out.clone(), trial.unwrap_or(0), *seed, stage);
            }
            let options = RunOptions {
                out_dir: out.clone(),
                trial: *trial,
                seed: *seed,
            };
            let outcome = if *error_free {
                error_free_upper_bound(&config, &options)?
            } else {
                run_experiment(&config, &options)?
            };
            print!("{}", outcome.report.render_table());
            println!("artifacts: {}", outcome.out_dir.display());
            if outcome.failed.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                for (trial, message) in &outcome.failed {
                    log::error!("trial {trial} failed: {message}");
                }
                Ok(ExitCode::from(3))
            }
        }
        Command::Ingest(args) => stage_command(args, Stage::Ingest),
        Command::Split(args) => stage_command(args, Stage::Split),
        Command::TrainCe(args) => stage_command(args, Stage::TrainCe),
        Command::Embed(args) => stage_command(args, Stage::Embed),
        Command::BuildStore(args) => stage_command(args, Stage::BuildStore),
        Command::TrainIm(args) => stage_command(args, Stage::TrainIm),
        Command::Predict(args) => stage_command(args, Stage::Predict),
        Command::Evaluate {
            stage,
            scores,
            truth,
            split,
        } => match (scores, truth, split) {
            (Some(scores), Some(truth), Some(split)) => evaluate_fixture(scores, truth, split),
            (None, None, None) => stage_command(stage, Stage::Evaluate),
            _ => Err(Error::Config(
                "fixture evaluation needs --scores, --truth and --split together".into(),
            )),
        },
    }
}

fn run_single_stage(
    config: &ExperimentConfig,
    out: Option<PathBuf>,
    trial: usize,
    seed: Option<u64>,
    stage: Stage,
) -> Result<ExitCode, Error> {
    let mut effective = config.clone();
    if let Some(seed) = seed {
        effective.seed = seed;
    }
    let out_dir = out.unwrap_or_else(|| effective.output_dir.clone());
    let runner = TrialRunner::new(&effective, &out_dir, trial, false)?;
    runner.run_stage(stage)?;
    println!(
        "stage {} complete for trial {trial} in {}",
        stage.name(),
        runner.trial_dir().display()
    );
    Ok(ExitCode::SUCCESS)
}

fn stage_command(args: &StageArgs, stage: Stage) -> Result<ExitCode, Error> {
    let config = ExperimentConfig::load(&args.config)?;
    run_single_stage(&config, args.out.clone(), args.trial, args.seed, stage)
}

/// Scores a fixture: a JSON array of ranked scores, a ground-truth corpus
/// and a split plan carrying the label partition.
fn evaluate_fixture(
    scores_path: &PathBuf,
    truth_path: &PathBuf,
    split_path: &PathBuf,
) -> Result<ExitCode, Error> {
    let text = std::fs::read_to_string(scores_path)?;
    let scores: Vec<RankedScores> = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("invalid scores file: {e}")))?;
    let corpus = cezsl::corpus::load_corpus(truth_path, None)?;
    let plan_text = std::fs::read_to_string(split_path)?;
    let plan: SplitPlan = serde_json::from_str(&plan_text)
        .map_err(|e| Error::Config(format!("invalid split plan: {e}")))?;

    let truths: BTreeMap<String, BTreeSet<String>> = corpus
        .documents
        .iter()
        .map(|d| {
            (
                d.doc_id.clone(),
                d.labels.iter().cloned().collect::<BTreeSet<_>>(),
            )
        })
        .collect();
    let partition = plan.partition();
    let gamma_s: BTreeSet<String> = partition.in_vocabulary().into_iter().collect();
    let metrics = compute_trial_metrics(&scores, &truths, &partition, &gamma_s)?;
    let report = aggregate(&[metrics], vec![])?;
    print!("{}", report.render_table());
    Ok(ExitCode::SUCCESS)
}
