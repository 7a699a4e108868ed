use thiserror::Error;

#[derive(Debug, Error)]
pub enum IsacError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("angle is not identifiable (Fisher information {0:e} below threshold)")]
    NonIdentifiable(f64),

    #[error("no serving beam for user {0}")]
    NoServingBeam(usize),

    #[error("missing receive combiner at BS {0}")]
    MissingCombiner(usize),

    #[error("solver contract violated: {0}")]
    ContractViolation(String),

    #[error("conic backend failure: {0}")]
    Backend(String),

    #[error("config error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("invalid config field `{field}`: {message}")]
    ConfigField { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = IsacError> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> IsacError {
    IsacError::InvalidArgument(msg.into())
}

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(IsacError::DimensionMismatch {
            context,
            expected,
            got,
        })
    }
}
