//! Verification suites, report files and plot tables for `cylspec`.
//!
//! The `cylspec` binary is a thin layer over [`run::run`], [`plot::emit_plot_data`]
//! and the one-shot `index` and `callias` commands in [`commands`].

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod plot;
pub mod report;
pub mod run;
pub mod suites;

pub use config::{Mutation, OperatorSpec, RunConfig, SuiteName};
pub use error::{CliError, CliResult};
pub use report::{Check, SuiteReport, Summary};
pub use run::{run, RunOutcome};
