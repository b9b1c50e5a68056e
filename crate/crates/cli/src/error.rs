use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error(transparent)]
    Core(#[from] arpbs_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("writing {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl HarnessError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        HarnessError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by the user's configuration rather than the run.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            HarnessError::Config { .. }
                | HarnessError::Parse(_)
                | HarnessError::Core(arpbs_core::Error::InvalidParameter { .. })
                | HarnessError::Core(arpbs_core::Error::UnknownProblem(_))
                | HarnessError::Core(arpbs_core::Error::DimensionMismatch { .. })
                | HarnessError::Core(arpbs_core::Error::MissingDerivative { .. })
        )
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
