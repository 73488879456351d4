//! `tctrack`: synthetic data, training, detection, tracking, evaluation
//! and tuning from one configuration file.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use tctrack_core::Exec;

pub use crate::config::RunConfig;
pub use crate::error::{CliError, ErrorKind};

#[derive(Debug, Parser)]
#[command(name = "tctrack", version, about = "Tropical-cyclone detection, tracking and evaluation")]
pub struct Cli {
    /// Run configuration (TOML). Relative paths inside it resolve against
    /// its directory.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for per-timestep and per-candidate loops.
    #[arg(long, short, global = true, default_value_t = 1)]
    jobs: usize,
    /// Override the top-level seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override any configuration key, e.g. `--set tracker.track_buffer=2`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scenario: grids, truth tracks, best-track CSV.
    Synth,
    /// Cut maps into labeled 40×40 patches and write the training dataset.
    Patchify,
    /// Train the classification and localization networks.
    Train,
    /// Detect storm centers on every map.
    Detect,
    /// Link detections into tracks and apply the physical filters.
    Track,
    /// Match detected tracks against observations.
    Match,
    /// Compute the metric suite and write the report tables.
    Metrics,
    /// Search tracker hyperparameters and select a Pareto-optimal set.
    Tune,
    /// Write per-track overlay bundles for plotting.
    Report,
    /// Print the effective configuration as TOML.
    ShowConfig,
}

/// Parses `args` (program name first) and runs them, as the binary does.
pub fn run_args<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::new(ErrorKind::Usage, e.to_string()))?;
    execute(cli)
}

/// Runs one parsed invocation. With `--jobs N > 1` the parallel loops use
/// a dedicated pool of N threads.
pub fn execute(cli: Cli) -> Result<(), CliError> {
    let mut overrides = cli.overrides;
    if let Some(s) = cli.seed {
        overrides.push(format!("seed={s}"));
    }
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    if cli.jobs == 0 {
        return Err(CliError::config("--jobs must be at least 1"));
    }
    let exec = Exec::from_jobs(cli.jobs);
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build()
            .map_err(|e| CliError::compute(e.to_string()))?;
        return pool.install(|| dispatch(&cli.command, &cfg, exec));
    }
    dispatch(&cli.command, &cfg, exec)
}

fn dispatch(command: &Command, cfg: &RunConfig, exec: Exec) -> Result<(), CliError> {
    match command {
        Command::Synth => commands::synth(cfg, exec),
        Command::Patchify => commands::patchify(cfg, exec),
        Command::Train => commands::train(cfg, exec),
        Command::Detect => commands::detect(cfg, exec),
        Command::Track => commands::track(cfg),
        Command::Match => commands::match_cmd(cfg),
        Command::Metrics => commands::metrics(cfg),
        Command::Tune => commands::tune(cfg, exec),
        Command::Report => commands::report(cfg),
        Command::ShowConfig => {
            print!("{}", cfg.to_toml()?);
            Ok(())
        }
    }
}
