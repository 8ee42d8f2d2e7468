use thiserror::Error;

use crate::solver::StepDiagnostics;

/// Errors raised by the library. The variants map one-to-one onto the CLI
/// exit-code categories.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: bad parameter values, impossible grids, parse failures.
    #[error("configuration error: {0}")]
    Config(String),

    /// A mathematical precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The implicit equation could not be solved to tolerance.
    #[error("implicit step failed at t = {t}: {reason} ({diagnostics:?})")]
    StepFailure {
        t: f64,
        reason: String,
        diagnostics: StepDiagnostics,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
