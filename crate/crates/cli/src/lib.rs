//! Batch driver around the `adaptive-bdf` engine: loads a run configuration,
//! builds the problem, runs it and writes CSV tables plus a JSON summary.

pub mod commands;
pub mod config;
pub mod output;
pub mod problems;

pub use commands::{cmd_compare_estimators, cmd_convergence, cmd_run, execute, CliError, CostStats, Execution};
pub use config::{ProblemId, RunConfig};
