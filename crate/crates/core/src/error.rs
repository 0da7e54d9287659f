use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// CSV parse failure. `row` counts data rows from 1 (0 is the header),
    /// `column` counts fields from 1.
    #[error("{}: row {row}, column {column}: {message}", path.display())]
    Csv {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("rank-deficient regressor matrix: {0}")]
    RankDeficient(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("non-finite values: {0}")]
    NonFinite(String),

    #[error("generator failure: {0}")]
    Generator(String),

    #[error("dimension mismatch: {0}")]
    Mismatch(String),

    #[error("base method failed on fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures caused by unreadable or malformed inputs and bad
    /// configuration, as opposed to failures inside a computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Csv { .. }
                | Error::InvalidSeries(_)
                | Error::InvalidGraph(_)
                | Error::Json(_)
                | Error::Config(_)
                | Error::Mismatch(_)
        )
    }
}
