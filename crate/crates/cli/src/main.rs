//! `latrel`: generate data, train the latent-space surrogate, and estimate
//! reliability from a TOML run configuration.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "latrel",
    version,
    about = "Latent-space surrogate reliability analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the configured one.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed, overriding the configured one.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample the labeled and unlabeled datasets.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Train autoencoder, GP and DFN and save the pipeline.
    Train {
        #[command(flatten)]
        common: Common,
        /// Where to write the pipeline (default: <out>/pipeline.json).
        #[arg(long)]
        artifact: Option<PathBuf>,
    },
    /// Monte Carlo reliability through a trained pipeline.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Trained pipeline (default: <out>/pipeline.json).
        #[arg(long)]
        artifact: Option<PathBuf>,
    },
    /// Monte Carlo reliability on the true limit state.
    Oracle {
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Generate { common } => {
            commands::load(&common).and_then(|cfg| commands::generate(&cfg))
        }
        Command::Train { common, artifact } => {
            commands::load(&common).and_then(|cfg| commands::train(&cfg, artifact.as_deref()))
        }
        Command::Analyze { common, artifact } => {
            commands::load(&common).and_then(|cfg| commands::analyze(&cfg, artifact.as_deref()))
        }
        Command::Oracle { common } => {
            commands::load(&common).and_then(|cfg| commands::oracle(&cfg))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
