use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {actual}")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        actual: String,
    },

    #[error("degenerate matrix: {0}")]
    DegenerateMatrix(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// Extrinsic conversion requested with a biased variance that is not
    /// strictly below the a-priori variance.
    #[error("no information: biased variance {biased} is not below {prior_side}")]
    NoInformation { biased: f64, prior_side: f64 },

    #[error("step size {alpha} outside the stable range (0, {alpha_max})")]
    Stability { alpha: f64, alpha_max: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("instance too large for exhaustive search: {candidates} candidates (limit {limit})")]
    TooLarge { candidates: u128, limit: u128 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dims(op: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::DimensionMismatch {
            op,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
