//! Command-line entry point.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::config::PipelineConfig;
use crate::error::{PipelineError, Result};
use crate::pipeline::run_pipeline;
use crate::stage::{parse_stage_list, Stage};
use crate::synthetic::{gen_synthetic, SyntheticOptions};

pub const LOG_LEVEL_ENV: &str = "NML_LOG_LEVEL";

#[derive(Parser)]
#[command(name = "nml", version, about = "Policy-expectation index, causality scans and explainable forecasts for weekly series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct StageArgs {
    /// Pipeline configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Artifact directory; overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root seed; overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Further stages to run with this one, comma separated.
    #[arg(long)]
    stages: Option<String>,
    /// Rerun stages even when their inputs and config are unchanged.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct GenArgs {
    /// Directory receiving the generated files.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 546)]
    weeks: usize,
    /// Poisson mean of messages per week.
    #[arg(long, default_value_t = 20.0)]
    message_rate: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Read messages, observation files and event dates onto the weekly grid.
    Ingest(StageArgs),
    /// Label message stances.
    Classify(StageArgs),
    /// Build the weekly MPE index, regimes and the announcement event study.
    Index(StageArgs),
    /// Transforms, descriptive statistics, unit-root and regime tests.
    Stats(StageArgs),
    /// Granger causality lag table.
    Granger(StageArgs),
    /// VMD decomposition and mode-level Granger scan.
    Vmd(StageArgs),
    /// Walk-forward LSTM ensemble and ARIMA comparison.
    Forecast(StageArgs),
    /// SHAP attributions, importance tables and the interaction analysis.
    Explain(StageArgs),
    /// Markdown report with tables and SVG figures.
    Report(StageArgs),
    /// Run the listed stages, or all of them.
    Run(StageArgs),
    /// Write a synthetic dataset with planted structure and a config for it.
    GenSynthetic(GenArgs),
}

fn load(args: &StageArgs) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(&args.config)?;
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run_stages(args: &StageArgs, stage: Option<Stage>) -> Result<serde_json::Value> {
    let cfg = load(args)?;
    let mut stages = match &args.stages {
        Some(list) => parse_stage_list(list).map_err(PipelineError::Config)?,
        None if stage.is_none() => Stage::ALL.to_vec(),
        None => Vec::new(),
    };
    stages.extend(stage);
    let outcomes = run_pipeline(&cfg, &stages, args.force)?;
    Ok(json!({ "output_dir": cfg.output_dir, "stages": outcomes }))
}

fn generate(args: &GenArgs) -> Result<serde_json::Value> {
    let opts = SyntheticOptions { seed: args.seed, weeks: args.weeks, message_rate: args.message_rate, ..SyntheticOptions::new(args.seed) };
    let data = gen_synthetic(&opts).map_err(PipelineError::Config)?;
    let files = data.write(&args.out).map_err(|e| PipelineError::Config(format!("{}: {e}", args.out.display())))?;
    Ok(json!({ "files": files, "messages": data.messages.len(), "weeks": data.grid.len(), "events": data.events.len() }))
}

fn dispatch(command: &Command) -> Result<serde_json::Value> {
    let (args, stage) = match command {
        Command::GenSynthetic(g) => return generate(g),
        Command::Run(a) => (a, None),
        Command::Ingest(a) => (a, Some(Stage::Ingest)),
        Command::Classify(a) => (a, Some(Stage::Classify)),
        Command::Index(a) => (a, Some(Stage::Index)),
        Command::Stats(a) => (a, Some(Stage::Stats)),
        Command::Granger(a) => (a, Some(Stage::Granger)),
        Command::Vmd(a) => (a, Some(Stage::Vmd)),
        Command::Forecast(a) => (a, Some(Stage::Forecast)),
        Command::Explain(a) => (a, Some(Stage::Explain)),
        Command::Report(a) => (a, Some(Stage::Report)),
    };
    run_stages(args, stage)
}

/// Parses `args`, runs the command and returns the process exit code.
/// Success prints a JSON summary to stdout; failure prints error JSON to
/// stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_LEVEL_ENV, "info")).try_init();
    match dispatch(&cli.command) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serialises"));
            0
        }
        Err(e) => {
            log::error!("{e}");
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
