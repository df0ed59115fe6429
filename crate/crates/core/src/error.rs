use thiserror::Error;

/// Failures raised by the optimizer and its building blocks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Every particle carries zero weight: total degeneracy of the particle system.
    #[error("all particle weights are zero")]
    AllWeightsZero,

    #[error("kernel-smoothing covariance is not positive semidefinite")]
    CovarianceNotPsd,

    #[error("non-finite gradient at coordinate {coordinate}")]
    NonFiniteGradient { coordinate: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("observation stream is empty")]
    EmptyStream,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An error raised while processing observation `t`.
    #[error("step {t}: {source}")]
    AtStep {
        t: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_step(self, t: u64) -> Self {
        match self {
            e @ Error::AtStep { .. } => e,
            e => Error::AtStep {
                t,
                source: Box::new(e),
            },
        }
    }

    /// Strips any step annotation and returns the underlying failure.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
