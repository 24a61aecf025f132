//! Experiment configuration and subcommands behind the `lrpde` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;

pub use commands::{CliError, CliResult};
pub use config::{Geometry, RunConfig};
