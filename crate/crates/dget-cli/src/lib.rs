//! Experiment harness: configuration, orchestration, persistence.

pub mod compare;
pub mod config;
pub mod runner;
pub mod sweep;

pub use config::{parse_config, ConfigError, ExperimentConfig};
pub use runner::{execute, gradcheck, prepare, run_to_files, HarnessError, RunSummary};
