//! `fraccite`: batch driver for the citation-indicator pipeline.
//!
//! Every subcommand except `simulate` reads a TOML run config and writes its
//! reports into the config's output directory, together with a
//! `manifest.tsv` recording output hashes, input hashes and parameters.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Run;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "fraccite", version, about = "Fractionally counted journal indicators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Run configuration (TOML).
    #[arg(short, long)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Corpus processing counts (processing_stats.tsv, rejections.tsv).
    Stats(ConfigArg),
    /// Integer and fractional citation tallies per journal (tally.tsv).
    Tally(ConfigArg),
    /// Quasi-impact factors and c/p ratios (indicators.csv, exclusions.tsv).
    Indicators(ConfigArg),
    /// Pearson/Spearman matrix of the indicators (correlations.csv).
    Correlate(ConfigArg),
    /// Omnibus and pairwise tests on the post-hoc journals
    /// (descriptives.tsv, omnibus.tsv, posthoc.csv).
    Posthoc(ConfigArg),
    /// Citation and significance networks with densities
    /// (citation.net, significance_integer.net, significance_fractional.net, density.csv).
    Network(ConfigArg),
    /// Random-intercept models of journals within fields (models.csv, models_notes.txt).
    Models(ConfigArg),
    /// Every report above in one run.
    Pipeline(ConfigArg),
    /// Synthetic corpus from a simulation spec (corpus.jsonl, master.tsv, run.toml).
    Simulate {
        /// Simulation spec (TOML).
        #[arg(short, long)]
        spec: PathBuf,
        #[arg(short, long)]
        out_dir: PathBuf,
    },
}

fn run_with_config(arg: &ConfigArg, f: fn(&mut Run) -> Result<(), CliError>) -> Result<(), CliError> {
    let mut run = Run::open(&arg.config)?;
    f(&mut run)?;
    run.finish()
}

fn configure_threads(config: &std::path::Path) -> Result<(), CliError> {
    // Thread count has to be fixed before rayon's global pool is first used.
    let (cfg, _, _) = config::RunConfig::load(config)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let (arg, f): (&ConfigArg, fn(&mut Run) -> Result<(), CliError>) = match &cli.command {
        Command::Stats(a) => (a, Run::stats),
        Command::Tally(a) => (a, Run::tally),
        Command::Indicators(a) => (a, Run::indicators),
        Command::Correlate(a) => (a, Run::correlate),
        Command::Posthoc(a) => (a, Run::posthoc),
        Command::Network(a) => (a, Run::network),
        Command::Models(a) => (a, Run::models),
        Command::Pipeline(a) => (a, Run::pipeline),
        Command::Simulate { spec, out_dir } => return commands::simulate(spec, out_dir),
    };
    configure_threads(&arg.config)?;
    run_with_config(arg, f)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let result = match Cli::try_parse() {
        Ok(cli) => dispatch(cli),
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => Err(CliError::Usage(e.render().to_string().trim_end().to_string())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
