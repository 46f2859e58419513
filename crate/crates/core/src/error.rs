use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Error kinds surfaced by the engine.
///
/// Each variant maps onto one of three broad classes (input, data
/// consistency, numerical) via [`Error::class`]; the CLI turns those into
/// exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("schema mismatch in {source_name}: missing column(s) {}", .columns.join(", "))]
    Schema {
        source_name: String,
        columns: Vec<String>,
    },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("data inconsistency: {0}")]
    Consistency(String),

    #[error("rank-deficient design: collinear column(s) {}", .0.join(", "))]
    RankDeficient(Vec<String>),

    #[error("numerical failure: {message}")]
    Numerical { message: String, trace: Vec<(f64, f64)> },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("geojson error: {0}")]
    GeoJson(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Consistency,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Domain(_)
            | Error::Invalid(_)
            | Error::Schema { .. }
            | Error::Parse { .. }
            | Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_)
            | Error::GeoJson(_) => ErrorClass::Input,
            Error::Consistency(_) => ErrorClass::Consistency,
            Error::RankDeficient(_) | Error::Numerical { .. } => ErrorClass::Numerical,
        }
    }

    pub(crate) fn numerical(message: impl Into<String>) -> Self {
        Error::Numerical {
            message: message.into(),
            trace: Vec::new(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
