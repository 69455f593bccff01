use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function (e.g. `x <= 0`).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Newton iterations exhausted; carries the last iterate in the caller's
    /// coefficient parameterization.
    #[error("Newton solver did not converge after {iterations} iterations (scaled gradient {gradient:e})")]
    NonConvergence {
        iterations: usize,
        gradient: f64,
        last: Vec<f64>,
    },

    #[error("local fit failed at grid index {index}: {source}")]
    GridFit {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("no feasible smoothing candidate")]
    NoFeasibleCandidate,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unknown {kind} '{value}'")]
    Unknown { kind: &'static str, value: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn unknown(kind: &'static str, value: impl Into<String>) -> Self {
        Error::Unknown {
            kind,
            value: value.into(),
        }
    }
}
