mod cmd;
mod config;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;

/// Listening-load study pipeline: stimulus synthesis, ear simulation,
/// OAE extraction, cohort statistics and EEG band power.
#[derive(Parser, Debug)]
#[command(author, version, about, long_about = None)]
struct Cli {
    /// TOML run configuration; command-line flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Root seed for every random draw (overrides seeds.root)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Increase log verbosity (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a session bundle: probe-embedded playback files plus manifest
    Synth(cmd::synth::Args),
    /// Simulate in-ear recordings for a session (one ear or a cohort)
    Simulate(cmd::simulate::Args),
    /// Extract probe magnitudes and SEDs into a results CSV
    Extract(cmd::extract::Args),
    /// Cohort statistics: sensitivities, load-effect test, summaries, plot data
    Analyze(cmd::analyze::Args),
    /// EEG preprocessing, ICA artifact rejection and band power per task
    Eeg(cmd::eeg::Args),
    /// Print a text summary of report.json and eeg_report.json
    Report(cmd::report::Args),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seeds.root = seed;
    }
    match cli.command {
        Command::Synth(args) => cmd::synth::run(cfg, args),
        Command::Simulate(args) => cmd::simulate::run(cfg, args),
        Command::Extract(args) => cmd::extract::run(cfg, args),
        Command::Analyze(args) => cmd::analyze::run(cfg, args),
        Command::Eeg(args) => cmd::eeg::run(cfg, args),
        Command::Report(args) => cmd::report::run(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::exit_code(&e))
        }
    }
}
