use std::path::PathBuf;

/// Errors raised across the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A numeric parameter lies outside its admissible domain.
    #[error("parameter `{name}` out of domain: {reason}")]
    Domain { name: &'static str, reason: String },

    /// Two vectors (or a vector and an operator) disagree in length.
    #[error("shape mismatch: expected length {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    /// A grid level outside `0..=n_max` was requested.
    #[error("level {n} outside grid 0..={n_max}")]
    Index { n: usize, n_max: usize },

    /// Not enough data points to compute a statistic.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The oracle parameter `n_opt` does not exist on this path.
    #[error("oracle parameter n_opt is absent on this path")]
    AbsentOracle,

    /// A probe was asked to run on a noise model it does not cover.
    #[error("noise model mismatch: {0}")]
    ModelMismatch(String),

    /// A file parsed but violates the documented schema.
    #[error("schema error in field `{field}`: {reason}")]
    Schema { field: String, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed document: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn schema(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Shape { expected, actual })
    }
}
