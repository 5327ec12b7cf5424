use thiserror::Error;

pub type Result<T> = std::result::Result<T, UcaError>;

#[derive(Debug, Error)]
pub enum UcaError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: String,
    },

    #[error("feature {column} has zero variance")]
    ZeroVariance { column: String },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("requested {requested} eigenpairs but at most {available} are available")]
    RankOutOfRange { requested: usize, available: usize },

    #[error("negative multiplier {value} at position {index}")]
    NegativeLambda { index: usize, value: f64 },

    #[error("unknown {kind} `{name}`")]
    UnknownStrategy { kind: &'static str, name: String },

    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl UcaError {
    pub(crate) fn mismatch(expected: usize, found: usize, context: impl Into<String>) -> Self {
        UcaError::DimensionMismatch {
            expected,
            found,
            context: context.into(),
        }
    }
}
