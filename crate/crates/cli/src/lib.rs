//! Batch harness around `mmwave-mfg`: runs scenarios and exports CSV tables.

pub mod commands;
pub mod export;

pub use commands::{run, CliError, Command, Options, RunReport};
