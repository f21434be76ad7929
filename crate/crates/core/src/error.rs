use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the operation's domain (bad lag, level, parameter).
    #[error("domain error: {0}")]
    Domain(String),

    /// The series has zero sample variance.
    #[error("degenerate series: sample variance is zero")]
    DegenerateSeries,

    #[error("series too short: length {len} is below the minimum of {min}")]
    SeriesTooShort { len: usize, min: usize },

    #[error("full enumeration of {n}! permutations exceeds the limit n <= {max}")]
    EnumerationTooLarge { n: usize, max: usize },

    /// Malformed input data, with the offending location when known.
    #[error("data error: {0}")]
    Data(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
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

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
