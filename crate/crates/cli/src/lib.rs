//! Experiment runner: JSON scenario files in, CSV and JSON results out.

pub mod compare;
pub mod config;
pub mod run;

pub use compare::{compare_runs, CompareReport};
pub use config::{ExperimentConfig, Task};
pub use run::{run_experiment, RunOptions, RunSummary};
