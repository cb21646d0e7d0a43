//! Experiment harness for `dynpricer`: config loading, runs and result files.

pub mod config;
pub mod describe;
pub mod output;
pub mod run;

use std::path::{Path, PathBuf};

pub use config::{load, parse, Algorithm, ConfigError, ExperimentConfig};
pub use describe::{describe, Description};
pub use output::{Summary, TraceRow};
pub use run::{run, RunRecord};

/// Exit status of a run whose gap check failed under `--assert-gap`.
pub const EXIT_GAP: i32 = 2;
/// Exit status of any error.
pub const EXIT_ERROR: i32 = 1;

/// Loads `config`, runs it and writes the result files. Returns the record
/// and the directory written to.
pub fn run_to_dir(config: &Path, seed: Option<u64>, out: Option<&Path>) -> anyhow::Result<(RunRecord, PathBuf)> {
    let cfg = load(config, seed)?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.clone());
    let record = run(&cfg)?;
    output::write_outputs(&dir, record.dim, &record.rows, &record.summary)?;
    Ok((record, dir))
}

// The guide's command-line chapter runs as doctests of this crate.
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
