//! Command-line front end: CSV ingestion, command dispatch and JSON reports.

pub mod args;
pub mod commands;
pub mod data;
pub mod error;
pub mod report;

pub use args::{Cli, Command};
pub use commands::execute;
pub use data::{load_csv, NamedDataset};
pub use error::{CliError, CliResult};
