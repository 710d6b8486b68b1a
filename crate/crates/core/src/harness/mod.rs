//! Experiment harness: configuration, the predefined experiment runners,
//! and deterministic result serialization.

pub mod config;
pub mod experiments;
pub mod report;

pub use config::ExperimentConfig;
