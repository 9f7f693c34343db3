// Copyright 2026 The rpsim Authors
// SPDX-License-Identifier: Apache-2.0

//! `rpsim`: pull-back simulation, convergence studies, diagnostics,
//! periodic-measure comparisons and Floquet reduction from a TOML config.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration or condition
//! error, 3 divergence, 4 failed order assertion, 5 Floquet logarithm
//! failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rpsim_core::Error;

use crate::commands::OrderAssertion;
use crate::config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("assertion failed: {0}")]
    Assertion(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Assertion(_) => 4,
            CliError::Core(e) => match e {
                Error::Divergence { .. } | Error::EnsembleDivergence { .. } => 3,
                Error::LogarithmExistence { .. } | Error::NumericalRank(_) => 5,
                _ => 2,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rpsim", version, about = "Random periodic solutions of SDEs by pull-back simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: available parallelism). Results do not
    /// depend on this value.
    #[arg(long)]
    threads: Option<usize>,
    /// Added to every configured seed.
    #[arg(long, default_value_t = 0)]
    seed_offset: u64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pull-back approximation at time r: trajectory.csv, pullback.json.
    Simulate(Common),
    /// Strong-error study and order fit: error_table.csv, fit.json.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Fail with exit code 4 unless |slope - ORDER| <= band.
        #[arg(long)]
        assert_order: Option<f64>,
        #[arg(long, default_value_t = 0.1, requires = "assert_order")]
        band: f64,
    },
    /// Shifted-pair and periodicity diagnostics: pair.csv, series.csv.
    Diagnose(Common),
    /// Weak distance to the periodic measure: measure.csv.
    Measure(Common),
    /// Floquet reduction of a periodic linear part: floquet.json, report.json.
    Floquet(Common),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::Simulate(c) | Command::Diagnose(c) | Command::Measure(c) | Command::Floquet(c) => c,
        Command::Converge { common, .. } => common,
    };
    let cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let (out, offset) = (&common.out, common.seed_offset);
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("config.toml"), cfg.to_toml())?;
    pool.install(|| match &cli.command {
        Command::Simulate(_) => commands::simulate(&cfg, out, offset),
        Command::Converge {
            assert_order, band, ..
        } => {
            let assertion = assert_order.map(|order| OrderAssertion { order, band: *band });
            commands::converge(&cfg, out, offset, assertion)
        }
        Command::Diagnose(_) => commands::diagnose(&cfg, out, offset),
        Command::Measure(_) => commands::measure(&cfg, out, offset),
        Command::Floquet(_) => commands::floquet_cmd(&cfg, out, offset),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rpsim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
