//! Configuration, run directories and the command pipelines behind the
//! `vflgan` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

pub use error::{CliError, Result};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "VFLGAN_THREADS";
