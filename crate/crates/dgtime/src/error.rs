use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid option, degree, rule size, or study setup.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data violates a structural requirement (symmetry, definiteness, dimensions).
    #[error("validation error: {0}")]
    Validation(String),

    /// A local operator could not be assembled.
    #[error("assembly error: {0}")]
    Assembly(String),

    /// A linear solve failed or did not converge.
    #[error("solver error: {message}")]
    Solver {
        message: String,
        /// Relative residual reached when the solver gave up, if meaningful.
        relative_residual: Option<f64>,
    },

    /// Malformed input file.
    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// Evaluation outside the time domain.
    #[error("range error: {0}")]
    Range(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn solver(message: impl Into<String>, relative_residual: Option<f64>) -> Self {
        Error::Solver {
            message: message.into(),
            relative_residual,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
