//! Batch experiment runner for the `nsalpha-core` solvers.
//!
//! An experiment is a plain-text configuration ([`config`]) naming a mode,
//! the model parameters, analytic initial data and acceptance tolerances.
//! [`runner::run`] executes it and writes a [`report::RunReport`] together
//! with AFLD field dumps and CSV tables.

pub mod config;
pub mod error;
pub mod initial;
pub mod report;
pub mod runner;
pub mod sweep;

pub use config::{ExperimentConfig, Mode, RawConfig};
pub use error::{CliError, CliResult};
pub use report::{RunReport, Verdict};
pub use runner::{execute, run, RunOutput};

/// Environment variable fixing the number of worker threads.
pub const THREADS_ENV: &str = "NSALPHA_THREADS";
