use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use tuplewise_clt::config::ExperimentConfig;
use tuplewise_clt::runner::{run, Outcome, RunOptions, Subcommand, VALIDATION_EXIT};

/// Run a tuplewise-independence experiment from a JSON config.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: config `out`, else `./out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut config = match ExperimentConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}: {e}", cli.config.display());
            return ExitCode::from(VALIDATION_EXIT as u8);
        }
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let base_dir = cli.config.parent().map(PathBuf::from).unwrap_or_default();
    let out_dir = cli
        .out
        .or_else(|| config.out.as_ref().map(|p| base_dir.join(p)))
        .unwrap_or_else(|| PathBuf::from("out"));
    let opts = RunOptions { out_dir, base_dir };
    match run(&config, cli.subcommand, &opts) {
        Ok(result) => {
            for path in &result.artifacts {
                println!("{}", path.display());
            }
            if result.outcome == Outcome::ToleranceFailure {
                eprintln!("{}: tolerance check failed", cli.subcommand.name());
            }
            ExitCode::from(result.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(VALIDATION_EXIT as u8)
        }
    }
}
