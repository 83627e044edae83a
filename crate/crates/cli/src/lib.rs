//! Command-line front end: configuration, file formats and subcommands.

pub mod app;
pub mod commands;
pub mod config;
pub mod error;
pub mod pgm;
pub mod tensorfile;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use tensorfile::TensorFile;
