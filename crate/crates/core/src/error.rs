use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value violates a domain invariant. `field` names the offending input.
    #[error("invalid {field}: {message}")]
    Invalid { field: String, message: String },

    #[error("{file}:{line}: column `{column}`: {message}")]
    Parse {
        file: PathBuf,
        line: u64,
        column: String,
        message: String,
    },

    #[error("{file}:{line}: study `{study_id}` has no row in the studies file")]
    OrphanStudy { file: PathBuf, line: u64, study_id: String },

    #[error("country `{country}`: every historical study has a single site, so no opening gap can be estimated; supply a gap override for this country")]
    NoGapHistory { country: String },

    #[error("no activation profile for countries: {}", .0.join(", "))]
    MissingProfiles(Vec<String>),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("cannot score {study_id}: {message}")]
    Unscorable { study_id: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Field name for validation failures, if any.
    pub fn field(&self) -> Option<&str> {
        match self {
            Error::Invalid { field, .. } => Some(field),
            Error::MissingProfiles(_) => Some("countries"),
            _ => None,
        }
    }
}
