//! Configuration ingestion and the `randboot` subcommands.

pub mod commands;
pub mod config;

pub use commands::{cmd_fanchart, cmd_power, cmd_run, cmd_selftest};
pub use config::{CliError, Mode, Overrides, PowerConfig, RunConfig, THREADS_ENV};
