//! `flexlmm`: propriety checks, oracle probes, sampling, Bayes factors and
//! density evaluation for linear mixed models with flexible random effects.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

#[derive(Debug, Parser)]
#[command(name = "flexlmm", version, about)]
struct Cli {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the `seed` field of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for output artifacts; overrides the `output` field.
    #[arg(long, env = "FLEXLMM_OUT")]
    out: Option<PathBuf>,
    /// Progress on stderr.
    #[arg(long, short)]
    verbose: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli.config, cli.seed, cli.out.as_deref(), cli.verbose) {
        Ok(status) => ExitCode::from(status.code()),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
