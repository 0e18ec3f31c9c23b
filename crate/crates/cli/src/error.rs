use std::path::Path;

use lifenav_core::datagen::DatagenError;
use lifenav_core::metrics::MetricsError;
use lifenav_core::scene::SceneError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 1 for invalid input, 2 for filesystem failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io { .. } => 2,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }
}

/// Attach a path to I/O errors coming out of the core crate.
pub trait WithPath<T> {
    fn at(self, path: &Path) -> Result<T>;
}

impl<T> WithPath<T> for std::result::Result<T, std::io::Error> {
    fn at(self, path: &Path) -> Result<T> {
        self.map_err(|e| CliError::io(path, e))
    }
}

impl<T> WithPath<T> for std::result::Result<T, SceneError> {
    fn at(self, path: &Path) -> Result<T> {
        self.map_err(|e| match e {
            SceneError::Io(io) => CliError::io(path, io),
            other => CliError::Validation(format!("{}: {other}", path.display())),
        })
    }
}

impl<T> WithPath<T> for std::result::Result<T, DatagenError> {
    fn at(self, path: &Path) -> Result<T> {
        self.map_err(|e| match e {
            DatagenError::Io(io) => CliError::io(path, io),
            other => CliError::Validation(format!("{}: {other}", path.display())),
        })
    }
}

impl From<DatagenError> for CliError {
    fn from(e: DatagenError) -> Self {
        match e {
            DatagenError::Io(io) => CliError::Io { path: "<unknown>".into(), source: io },
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<SceneError> for CliError {
    fn from(e: SceneError) -> Self {
        match e {
            SceneError::Io(io) => CliError::Io { path: "<unknown>".into(), source: io },
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<lifenav_core::compressor::CompressError> for CliError {
    fn from(e: lifenav_core::compressor::CompressError) -> Self {
        CliError::Validation(e.to_string())
    }
}
