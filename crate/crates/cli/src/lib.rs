//! Library side of the `coexist` command-line tool: run configurations,
//! provenance headers, subcommands and the verification suite.

pub mod checks;
pub mod commands;
pub mod config;
pub mod error;
pub mod provenance;

pub use error::{CliError, Result};
