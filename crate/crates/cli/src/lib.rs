//! Command-line front end for EigenSpot: matrix CSV formats, report files,
//! external verdict ingestion and the `detect` / `simulate` / `study`
//! commands.

pub mod commands;
pub mod error;
pub mod matrix_io;
pub mod report;
pub mod verdicts;

pub use commands::{run, Cli, EXIT_ERROR, EXIT_FOUND, EXIT_NONE};
pub use error::{CliError, CliResult};
