use std::fmt;

/// Errors produced by ingestion, simulation, inference and analysis.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed input. `line` is 1-based (a record index for line-delimited JSON).
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A value outside the domain an operation is defined on.
    #[error("{0}")]
    Domain(String),

    /// A test statistic that cannot be computed for the given samples.
    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),

    /// A persisted model that violates the schema or the model invariants.
    #[error("model field `{field}`: {message}")]
    Model { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl fmt::Display) -> Self {
        Error::Domain(msg.to_string())
    }

    pub(crate) fn parse(line: usize, msg: impl fmt::Display) -> Self {
        Error::Parse {
            line,
            message: msg.to_string(),
        }
    }

    pub(crate) fn model(field: impl Into<String>, msg: impl fmt::Display) -> Self {
        Error::Model {
            field: field.into(),
            message: msg.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
