//! Configuration, file formats and experiment drivers for the `fdrt` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod sinofile;
pub mod verify;

pub use commands::Context;
pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use sinofile::SinogramFile;
