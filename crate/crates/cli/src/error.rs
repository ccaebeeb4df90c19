use std::path::PathBuf;

use thiserror::Error;

/// Harness failures. [`CliError::exit_code`] maps them to process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("data file not found: {}", .0.display())]
    DataFileMissing(PathBuf),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("cannot parse row {row}, column '{column}'")]
    ParseError { row: usize, column: String },
    #[error("value out of range: {0}")]
    RangeError(String),
    #[error("measurements have zero variance")]
    DegenerateVariance,
    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },
    #[error("bandwidth grid is empty")]
    EmptyGrid,
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Core(#[from] symtest_core::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::ConfigInvalid(msg.into())
    }

    pub fn io(path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }

    /// 2 for configuration problems, 3 for data problems.
    pub fn exit_code(&self) -> i32 {
        use symtest_core::Error as E;
        match self {
            CliError::ConfigInvalid(_) | CliError::EmptyGrid => 2,
            CliError::Core(e) => match e {
                E::InvalidDescriptor { .. }
                | E::BadParameters(_)
                | E::BadMonteCarloBudget(_)
                | E::BadLandmarkCount { .. }
                | E::BadProjectionCount
                | E::UnsupportedFamily(_)
                | E::UnsupportedKind { .. }
                | E::NonCompactGroup(_)
                | E::VariantMismatch => 2,
                _ => 3,
            },
            _ => 3,
        }
    }
}
