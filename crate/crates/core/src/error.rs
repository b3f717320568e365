use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("singular design: column {column} is collinear with earlier columns")]
    SingularDesign { column: usize },

    #[error("non-stationary or non-invertible specification: {0}")]
    NonStationary(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },

    #[error("experiment {fingerprint}: {source}")]
    Experiment {
        fingerprint: String,
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by the numbers rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Experiment { source, .. } => source.is_numerical(),
            other => matches!(
                other,
                Error::Diverged { .. } | Error::Numerical(_) | Error::NonStationary(_)
            ),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
