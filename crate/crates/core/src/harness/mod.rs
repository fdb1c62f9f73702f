//! Declarative experiment runner behind the `he` binary.

pub mod checks;
pub mod config;
pub mod experiments;
pub mod report;
pub mod tolerances;

pub use config::{Experiment, ExperimentConfig};
pub use experiments::{exit_code, run, run_criterion, RunOptions, RunOutput};
pub use report::{Check, CriterionOutcome, Report};
