//! Experiment harness: configuration, Monte Carlo driver, result emission
//! and the command-line front end.

pub mod cli;
pub mod config;
pub mod results;
pub mod run;

pub use cli::cli_dispatch;
pub use config::{ExperimentConfig, ExperimentKind, MethodKind, OutputFormat, THREADS_ENV};
pub use results::{aggregate, emit_results, Aggregate, ResultSet, TrialRecord};
pub use run::run_experiment;
