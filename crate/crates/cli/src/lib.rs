//! Batch driver for monopole simulations and estimate-verification sweeps.
//!
//! A run reads a flat `key = value` configuration, executes one command,
//! and writes CSV tables, a `manifest.txt` and a `plot.py` into the output
//! directory. CSV bytes depend only on the configuration.

pub mod commands;
pub mod config;
pub mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use thiserror::Error;

pub use commands::JobOutput;
pub use config::{load_config, parse_config, Command, RunConfig, KEYS};
pub use output::{Check, Table};

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "MONOPOLE_LAB_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] monopole_core::Error),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for usage errors, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

/// Outcome of [`run`].
#[derive(Debug, Clone)]
pub struct RunReport {
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
    pub wall: Duration,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn exit_code(&self) -> u8 {
        if self.passed() {
            0
        } else {
            1
        }
    }
}

/// Builds the configuration of one invocation. File values are applied
/// first, then `key=value` overrides, then `--seed` and `--out`; the
/// positional command wins over a `command` key.
pub fn resolve(
    command: &str,
    config: Option<&Path>,
    seed: Option<u64>,
    out: Option<&Path>,
    overrides: &[String],
) -> Result<RunConfig, CliError> {
    let mut cfg = match config {
        Some(p) => config::parse_unvalidated(&config::read_config(p)?)?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(overrides)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.output_dir = o.to_path_buf();
    }
    cfg.command = command.parse()?;
    cfg.validate()
}

/// Sizes the global thread pool from [`THREADS_ENV`] when set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!("{THREADS_ENV} = `{v}` is not a positive integer"))
    })?;
    // A pool that already exists (tests, repeated calls) is kept.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

/// Executes the configured command and writes its artifacts.
pub fn run(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(output::io_err(dir))?;
    let job = commands::execute(cfg, dir)?;
    let mut files = output::write_tables(dir, &job.tables)?;

    let plot = dir.join("plot.py");
    output::write_file(&plot, &output::plot_script(&job.tables))?;
    files.push(plot);

    let wall = start.elapsed();
    let manifest = dir.join("manifest.txt");
    output::write_file(
        &manifest,
        &output::manifest(cfg, &job.tables, &job.checks, wall),
    )?;
    files.push(manifest);

    Ok(RunReport {
        checks: job.checks,
        files,
        wall,
    })
}
