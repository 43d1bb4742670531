//! Experiment harness behind the `mfpsro` binary: configuration files,
//! solver dispatch and result files.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{cmd_compare, cmd_compress_demo, cmd_run, execute, CompareEntry, RunRecord, SolverRun};
pub use config::{parse_config, CompressConfig, ExperimentConfig, Invocation, SolverConfig};
pub use error::{CliError, Result};
