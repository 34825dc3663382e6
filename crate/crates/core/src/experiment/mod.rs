//! Experiment harness behind `aircomp run`.
//!
//! A JSON [`config::ExperimentConfig`] selects one experiment. Sweeps write
//! `<experiment>.csv` with one row per (x, scheme) and, when plots are on, an
//! SVG with the same name.

pub mod config;
pub mod plot;
pub mod runner;

pub use config::{ExperimentConfig, ExperimentKind, Resolved, SnrProfile};
pub use runner::{execute, run, Artifact, RunOutput, SweepRow};
