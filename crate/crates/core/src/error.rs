use thiserror::Error;

/// Errors produced by training, prediction and persistence.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("target at index {index} is {value}; targets must be strictly positive")]
    NonPositiveTarget { index: usize, value: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    /// An internal bookkeeping invariant broke during a solve.
    #[error("invariant violated at iteration {iter} (working set {i_star}, {j_star}): {detail}")]
    Invariant {
        iter: usize,
        i_star: usize,
        j_star: usize,
        detail: String,
    },

    #[error("parse error at line {line}{}: {message}", field.as_ref().map(|f| format!(", field `{f}`")).unwrap_or_default())]
    Parse {
        line: usize,
        field: Option<String>,
        message: String,
    },

    #[error("unsupported model format version `{found}` (expected v1)")]
    Version { found: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(line: usize, field: Option<&str>, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            field: field.map(str::to_owned),
            message: message.into(),
        }
    }
}
