use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input outside an operation's mathematical domain (invariant violation).
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature could not meet the requested tolerances.
    #[error("quadrature failure: {0}")]
    Quadrature(String),

    /// A value exceeded the representable f64 range.
    #[error("overflow: {0}")]
    Overflow(String),

    /// Malformed or unusable input data (files, CSV rows, empty series).
    #[error("data error: {0}")]
    Data(String),

    #[error("calibration failure: {0}")]
    Calibration(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
