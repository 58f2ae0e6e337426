//! Command-line front end for `ptc-core`: sampling, single estimates, multi-trial
//! experiments and CSV ingestion.

pub mod commands;
pub mod config;
pub mod experiment;
pub mod ingest;

use ptc_core::PtcError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("ingest error: {0}")]
    Ingest(String),
    #[error(transparent)]
    Core(#[from] PtcError),
}

impl CliError {
    /// 1 for usage errors, 2 for I/O and input data, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) | CliError::Ingest(_) => 2,
            CliError::Core(e) => match e {
                PtcError::Numerical { .. }
                | PtcError::Fit(_)
                | PtcError::DegenerateModel(_)
                | PtcError::Invariant(_) => 3,
                _ => 1,
            },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
