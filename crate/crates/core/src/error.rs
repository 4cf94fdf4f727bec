use thiserror::Error;

/// Errors raised by the simulation library.
///
/// Variants are grouped so the command line front end can map them onto
/// stable exit codes (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {dim} exceeds the configured limit {limit}")]
    DimensionLimit { dim: usize, limit: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("data integrity: {0}")]
    DataIntegrity(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid sampler specification: {0}")]
    Spec(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("internal consistency: {0}")]
    Internal(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    /// Process exit code: 2 usage, 3 input data, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Argument(_)
            | Error::Spec(_)
            | Error::Unsupported(_)
            | Error::DimensionLimit { .. }
            | Error::Contract(_) => 2,
            Error::Parse { .. } | Error::Io(_) | Error::Csv(_) | Error::DataIntegrity(_) => 3,
            Error::Precondition(_) | Error::Validation(_) => 3,
            Error::Numerical(_) | Error::Internal(_) => 4,
        }
    }
}
