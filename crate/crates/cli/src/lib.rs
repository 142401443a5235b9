//! Command-line experiments on storage-process extremes.
//!
//! Precedence for every setting: command-line flag, then the config file,
//! then the built-in default. The master seed may also come from `GSE_SEED`;
//! an explicit `--seed` wins.

pub mod commands;
pub mod config;
pub mod output;

use std::io::Write;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use gse_core::pickands::PickandsCache;
use serde::Serialize;

use crate::commands::Context;
use crate::config::{Checked, ExperimentConfig, Format};
use crate::output::{render, Report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "gse", version, about = "Extremes of Gaussian storage processes: asymptotics and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true, env = "GSE_SEED")]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Omit timestamps and timings so reruns are byte-identical.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
    /// Write one sample input path (binary dump) here.
    #[arg(long, global = true)]
    pub dump_paths: Option<PathBuf>,
    /// JSON-lines cache of Pickands constants.
    #[arg(long, global = true)]
    pub pickands_cache: Option<PathBuf>,
    /// Never estimate Pickands constants; read them from the cache or config.
    #[arg(long, global = true)]
    pub no_estimate: bool,
    /// Override the Monte Carlo replicate count.
    #[arg(long, global = true)]
    pub n: Option<u64>,
    /// Override the levels, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Asymptotic tail approximations per level.
    Asymptotics,
    /// Monte Carlo tail probabilities.
    Simulate,
    /// Pickands-type constants for the configured model.
    Pickands,
    /// Monte Carlo against asymptotics.
    Compare,
    /// Sup / point / inf probabilities on common paths.
    Piterbarg,
    /// Check the variance model's index assumptions.
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Asymptotics => "asymptotics",
            Command::Simulate => "simulate",
            Command::Pickands => "pickands",
            Command::Compare => "compare",
            Command::Piterbarg => "piterbarg",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] gse_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            _ => EXIT_FAILURE,
        }
    }
}

fn load(cli: &Cli) -> Result<Checked, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut config = ExperimentConfig::parse(&text).map_err(CliError::Config)?;
    if let Some(n) = cli.n {
        config.mc.n = n;
    }
    if let Some(levels) = &cli.levels {
        config.levels = levels.clone();
    }
    if let Some(f) = cli.format {
        config.outputs.format = f;
    }
    if let Some(p) = &cli.out {
        config.outputs.path = Some(p.clone());
    }
    config.check().map_err(CliError::Config)
}

/// Writes rows in the configured format.
fn emit<R: Serialize>(exp: &Checked, stamp: (u64, bool), command: Command, rows: Vec<R>) -> Result<(), CliError> {
    let (seed, timestamps) = stamp;
    let generated_at = timestamps
        .then(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0));
    let report = Report { command: command.name().into(), seed, generated_at, rows };
    let text = render(&report, exp.config.outputs.format)?;
    match &exp.config.outputs.path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Runs a parsed command line and returns the process exit code.
pub fn execute(cli: &Cli) -> Result<i32, CliError> {
    let exp = load(cli)?;
    let seed = cli.seed.or(exp.config.mc.seed).unwrap_or(0);
    let cache = cli.pickands_cache.as_ref().map(PickandsCache::open).transpose()?;
    let mut ctx = Context { seed, timestamps: !cli.no_timestamp, offline: cli.no_estimate, cache };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    pool.install(|| {
        let cmd = cli.command;
        let stamp = (ctx.seed, ctx.timestamps);
        match cmd {
            Command::Asymptotics => emit(&exp, stamp, cmd, commands::asymptotics(&exp, &mut ctx)?)?,
            Command::Simulate => emit(&exp, stamp, cmd, commands::simulate(&exp, &mut ctx, cli.dump_paths.as_deref())?)?,
            Command::Pickands => emit(&exp, stamp, cmd, commands::pickands(&exp, &mut ctx)?)?,
            Command::Compare => emit(&exp, stamp, cmd, commands::compare(&exp, &mut ctx)?)?,
            Command::Piterbarg => emit(&exp, stamp, cmd, commands::piterbarg(&exp, &mut ctx)?)?,
            Command::Validate => {
                let rows = commands::validate(&exp)?;
                let passed = rows.iter().all(|r| r.report.passed);
                emit(&exp, stamp, cmd, rows)?;
                if !passed {
                    return Ok(EXIT_VALIDATION);
                }
            }
        }
        Ok(EXIT_OK)
    })
}

/// Parses `args` (including the program name) and runs; errors go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("gse: {e}");
            e.exit_code()
        }
    }
}
