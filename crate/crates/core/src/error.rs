use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the library.
///
/// Row-level problems in input files are not errors: they are counted in an
/// [`IngestReport`](crate::ingest::IngestReport) and the row is dropped.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: missing required column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}: CSV error: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{context}: invalid JSON: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("feature {index}: {message}")]
    Geometry { index: usize, message: String },

    #[error("invalid value: {0}")]
    Invalid(String),

    #[error("network error: {0}")]
    Network(String),

    #[error("malformed knowledge-base response: {message}")]
    MalformedResponse { message: String, payload: String },

    #[error("kendall tau needs at least two items, got {0}")]
    TooFewItems(usize),

    #[error("rankings have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("kendall tau is undefined: one ranking is constant")]
    UndefinedCorrelation,

    #[error("{} annotation rows are not annotated: {}", .0.len(), .0.join(", "))]
    Unannotated(Vec<String>),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the network or a missing recorded response.
    pub fn is_network(&self) -> bool {
        matches!(self, Error::Network(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
