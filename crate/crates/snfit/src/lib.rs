//! File formats, reports and parallel drivers around [`snfit_core`].
//!
//! The binary `snfit` is a thin clap front end over [`commands`]; everything it does
//! is reachable from here as well.

pub mod commands;
pub mod data;
mod error;
pub mod output;
pub mod parallel;

pub use commands::{Command, RunConfig};
pub use data::{load_csv, load_csv_from_reader, LoadedData};
pub use error::CliError;
pub use output::{Format, Report, Status};
