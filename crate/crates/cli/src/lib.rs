//! Batch experiment runner: loads a TOML experiment config, executes the
//! named tester against a library scenario, and writes a JSON report, a
//! plot-ready CSV series, and a text summary. Also hosts the packaged
//! verification suite behind `verify-all`.

pub mod acceptance;
pub mod config;
pub mod runner;

pub use acceptance::{verify_all, CriterionOutcome, VerifyOptions};
pub use config::{ConfigError, ExperimentConfig};
pub use runner::{execute, exit_code, list_scenarios, resolve_out_dir, run_config, RunnerError};
