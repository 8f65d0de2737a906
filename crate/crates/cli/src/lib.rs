//! Experiment plumbing behind the `consensus-lab` command.

pub mod config;
pub mod experiment;
pub mod reproduce;
pub mod sweep;

pub use config::SimConfig;
pub use experiment::{run_experiment, ExperimentReport};
pub use reproduce::{reproduce, Case, ReproOptions};
pub use sweep::{sweep, SweepGrid};
