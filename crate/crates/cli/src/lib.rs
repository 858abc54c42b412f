//! Library side of the `censvine` command-line tool.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;

pub use config::ModelConfig;
pub use error::{CliError, CliResult};
