use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("model does not support {0}")]
    Unsupported(&'static str),

    #[error("underdetermined fit: {samples} samples for {coefficients} coefficients")]
    Underdetermined { samples: usize, coefficients: usize },

    #[error("root finding diverged: no bracket within |z| <= {bound:e} for target {target}")]
    Divergence { target: f64, bound: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("component {index}: {source}")]
    Component {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("map file: {0}")]
    Serialization(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn in_component(self, index: usize) -> Self {
        Error::Component {
            index,
            source: Box::new(self),
        }
    }
}
