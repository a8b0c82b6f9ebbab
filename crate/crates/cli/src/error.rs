use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Schema {
        path: PathBuf,
        #[source]
        source: serde_path_to_error::Error<serde_json::Error>,
    },

    #[error("invalid configuration: {0}")]
    Invalid(String),

    #[error("malformed input {path}: {reason}")]
    Input { path: PathBuf, reason: String },

    #[error(transparent)]
    Core(mfkg_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Process exit status for each error kind.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Schema { .. } | CliError::Input { .. } => 3,
            CliError::Invalid(_) => 4,
            CliError::Core(_) => 5,
            CliError::Io { .. } | CliError::Csv(_) | CliError::Json(_) => 6,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<mfkg_core::Error> for CliError {
    fn from(e: mfkg_core::Error) -> Self {
        use mfkg_core::Error as E;
        match e {
            E::InvalidGrid(_) | E::InvalidParameter { .. } | E::InvalidPotential(_) => CliError::Invalid(e.to_string()),
            other => CliError::Core(other),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
