//! Command-line pipeline for repository popularity forecasting.
//!
//! `ingest` turns an event stream into a count panel with graph-component
//! features; `train` and `fit-arima` produce forecasts from it; `evaluate`
//! compares them; `segment` clusters the users; `sweep` scores loop-back
//! lengths; `bench` runs the whole comparison on generated coupled series.
//! Every command is deterministic given its inputs, config, and seed.

use clap::{Parser, Subcommand};
use repopulse_cli::artifacts::CommandError;
use repopulse_cli::commands;
use repopulse_cli::config::{self, EventChoice, Overrides, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "repopulse", version, about = "Repository popularity forecasting and user segmentation")]
struct Cli {
    /// TOML config file; command-line flags override its values
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Line-delimited event stream
    #[arg(long, global = true, value_name = "PATH")]
    events: Option<PathBuf>,
    /// Which popularity signal to count
    #[arg(long, global = true, value_enum, value_name = "TYPE")]
    event_type: Option<EventChoice>,
    /// Length of one counting window in days
    #[arg(long, global = true, value_name = "DAYS")]
    window_days: Option<u32>,
    /// How many of the busiest repositories to track
    #[arg(long, global = true, value_name = "K")]
    top_k: Option<usize>,
    /// Past windows fed to the sequence model per prediction
    #[arg(long, global = true, value_name = "L")]
    loopback: Option<usize>,
    /// Seed for every randomized step
    #[arg(long, global = true, value_name = "SEED")]
    seed: Option<u64>,
    /// Directory for all artifacts
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse events, pick the busiest repositories, write the count panel
    Ingest,
    /// Train the joint sequence model on the ingested panel
    Train,
    /// Fit per-repository benchmark models on the ingested panel
    FitArima,
    /// Compare the trained model's forecasts against the benchmark's
    Evaluate,
    /// Cluster users into topic-labeled segments
    Segment,
    /// Score every candidate loop-back length and report the best
    Sweep,
    /// Generate coupled synthetic series and run the full comparison
    Bench,
}

fn effective_config(cli: &Cli) -> Result<RunConfig, CommandError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| match e {
            config::ConfigError::Unreadable { .. } => CommandError::Input(e.to_string()),
            _ => CommandError::Validation(e.to_string()),
        })?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(&Overrides {
        events: cli.events.clone(),
        event_type: cli.event_type,
        window_days: cli.window_days,
        top_k: cli.top_k,
        loopback: cli.loopback,
        seed: cli.seed,
        out_dir: cli.out_dir.clone(),
    });
    cfg.validate().map_err(|e| CommandError::Validation(e.to_string()))?;
    Ok(cfg)
}

/// REPOPULSE_THREADS caps worker threads for every parallel stage.
fn cap_threads() {
    if let Ok(raw) = std::env::var("REPOPULSE_THREADS") {
        match raw.parse::<usize>() {
            Ok(n) if n >= 1 => {
                // a failure here means a pool already exists, which only
                // happens in-process during tests; the cap still applies
                // to every pool built afterwards
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: ignoring REPOPULSE_THREADS={raw}; expected a positive integer"),
        }
    }
}

fn dispatch(cli: &Cli) -> Result<u8, CommandError> {
    let cfg = effective_config(cli)?;
    match cli.command {
        Command::Ingest => commands::ingest::run(&cfg),
        Command::Train => commands::train::run(&cfg),
        Command::FitArima => commands::fit_arima::run(&cfg),
        Command::Evaluate => commands::evaluate::run(&cfg),
        Command::Segment => commands::segment::run(&cfg),
        Command::Sweep => commands::sweep::run(&cfg),
        Command::Bench => commands::bench::run(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    cap_threads();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
