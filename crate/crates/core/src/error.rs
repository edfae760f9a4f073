use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Pure DP (delta = 0) needs finite parameter bounds; there is no finite
    /// bin family otherwise.
    #[error("pure differential privacy (delta = 0) requires finite bounds: {0}")]
    UnsupportedPureDpUnbounded(String),

    #[error("sample-size gate not met: n = {n}, required {required}")]
    GateNotMet { n: u64, required: f64 },

    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    #[error("an infinite bin family needs the stability-based histogram (delta > 0)")]
    RequiresStabilityMechanism,

    #[error("the stability-based histogram needs delta > 0; use the Laplace histogram")]
    RequiresLaplaceMechanism,

    #[error("arithmetic overflow: {0}")]
    Overflow(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors caused by the caller's parameters rather than by the
    /// data or the randomness of a run.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::UnsupportedPureDpUnbounded(_)
                | Error::RequiresStabilityMechanism
                | Error::RequiresLaplaceMechanism
                | Error::Overflow(_)
                | Error::Parse { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
