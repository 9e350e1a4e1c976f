use std::fmt::Display;
use std::io;
use std::path::Path;

use thiserror::Error;

use dibrm_core::{CompareError, IngestError, ModelError, ScoreError, SeriesError, SweepError, SynthError};

/// Failure of one command. Validation problems exit with 1, I/O problems
/// with 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
        }
    }

    pub fn invalid(message: impl Display) -> Self {
        CliError::Validation(message.to_string())
    }

    pub fn io_at(path: &Path, err: impl Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

macro_rules! validation_from {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Validation(e.to_string())
            }
        })*
    };
}

validation_from!(
    CompareError,
    ModelError,
    ScoreError,
    SeriesError,
    SweepError,
    SynthError
);
