//! Configuration, orchestration and file output for the `fpme` command.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
mod error;
pub mod output;

pub use error::CliError;
