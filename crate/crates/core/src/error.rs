use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // numerical kernel
    #[error("matrix is not positive definite (jitter escalation exhausted)")]
    NotPositiveDefinite,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("standard deviation must be positive, got {0}")]
    NonPositiveStd(f64),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    // limit-state expressions
    #[error("syntax error at position {position}: {message}")]
    SyntaxError { position: usize, message: String },
    #[error("unknown function '{0}'")]
    UnknownFunction(String),
    #[error("variable index {index} out of range for dimension {dimension}")]
    IndexOutOfRange { index: i64, dimension: usize },
    #[error("division by zero")]
    DivisionByZero,
    #[error("expression evaluated to a non-finite value")]
    NonFiniteResult,

    // data ingestion
    #[error("i/o error: {0}")]
    Io(String),
    #[error("malformed row at line {0}")]
    MalformedRow(u64),
    #[error("non-numeric cell at line {line}, column {column}")]
    NonNumericCell { line: u64, column: usize },

    // training
    #[error("training diverged: {0}")]
    DivergenceDetected(String),
    #[error("hyperparameter optimizer failed: {0}")]
    OptimizerFailed(String),
    #[error("genome length {actual} does not match architecture ({expected} parameters)")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("non-finite prediction")]
    NonFinitePrediction,

    // configuration and artifacts
    #[error("config error in '{field}': {message}")]
    Config { field: String, message: String },
    #[error("artifact mismatch: {0}")]
    ArtifactVersionMismatch(String),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for failures of the numerical machinery rather than of user input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite
                | Error::DivisionByZero
                | Error::NonFiniteResult
                | Error::DivergenceDetected(_)
                | Error::OptimizerFailed(_)
                | Error::NonFinitePrediction
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
