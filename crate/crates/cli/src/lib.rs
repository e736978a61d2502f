//! Command line driver for the clonescope pipeline.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod exit;
pub mod explain;
pub mod io;
pub mod report;
pub mod run;
pub mod svg;

pub use config::{ExperimentConfig, Overrides};
pub use exit::{CliError, CliResult, ExitKind};
