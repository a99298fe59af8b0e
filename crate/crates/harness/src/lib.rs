//! Experiment harness: configuration documents, presets, artifact writing and
//! the commands behind the `trajrl` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod presets;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
