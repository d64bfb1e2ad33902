use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] vflgan_core::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("{}: {1}", .0.display())]
    Io(PathBuf, #[source] std::io::Error),

    #[error("{}: {1}", .0.display())]
    Json(PathBuf, #[source] serde_json::Error),

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("run directory {} is not empty", .0.display())]
    DirtyOutput(PathBuf),
}

pub type Result<T> = std::result::Result<T, CliError>;
