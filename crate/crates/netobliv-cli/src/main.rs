//! `netobliv`: sweep runner, invariant checker and GAP study.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

mod commands;
mod config;
mod suite;

use config::SweepConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("failed: {0}")]
    Failed(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

#[derive(Parser)]
#[command(name = "netobliv", version, about = "Runs network-oblivious algorithms and prices their traces")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// JSON sweep configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the sweep and write report.csv and report.json.
    Run {
        #[command(flatten)]
        common: Common,
        /// Check outputs against the oracles only.
        #[arg(long)]
        check_only: bool,
    },
    /// Check structural properties and print PASS/FAIL per property.
    Verify {
        #[command(flatten)]
        common: Common,
    },
    /// Oblivious over aware broadcast cost across a sigma grid.
    Gap {
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Run { common, check_only } => {
            SweepConfig::load(&common.config).and_then(|c| commands::cmd_run(&c, common.out.as_deref(), *check_only))
        }
        Cmd::Verify { common } => SweepConfig::load(&common.config).and_then(|c| commands::cmd_verify(&c, common.out.as_deref())),
        Cmd::Gap { common } => SweepConfig::load(&common.config).and_then(|c| commands::cmd_gap(&c, common.out.as_deref())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("netobliv: {e}");
            ExitCode::from(e.code())
        }
    }
}
