use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported oracle: {0}")]
    UnsupportedOracle(String),

    #[error("degenerate instance: {0}")]
    DegenerateInstance(String),

    #[error("degenerate operator: K has no positive singular value")]
    DegenerateOperator,

    #[error("degenerate spectral bounds: lambda1 = lambda2 = {0}")]
    DegenerateBounds(f64),

    #[error("indefinite metric: eta * theta * lambda_max = {0} exceeds 1")]
    IndefiniteMetric(f64),

    #[error("divergence at iteration {iteration}: |x| = {norm:e} exceeds {limit:e}")]
    Divergence {
        iteration: usize,
        norm: f64,
        limit: f64,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the numerics rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. }
                | Error::DegenerateInstance(_)
                | Error::DegenerateOperator
                | Error::DegenerateBounds(_)
                | Error::IndefiniteMetric(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, v: &[f64]) -> Result<()> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found: v.len(),
        })
    }
}
