use thiserror::Error;

/// Errors raised by the modelling, fitting and prediction routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("Möbius unit evaluated at its pole (|θ₃z+θ₄| = {0:e})")]
    MobiusPole(f64),

    #[error("warp unit `{unit}` requires dimension {expected}, got {got}")]
    UnsupportedDimension {
        unit: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("process index {index} out of range for {count} processes")]
    ProcessIndex { index: usize, count: usize },

    #[error("invalid warp unit: {0}")]
    InvalidWarp(String),

    #[error("homogenization anchors are colinear or coincident (triangle area {area:e})")]
    DegenerateAnchors { area: f64 },

    #[error("invalid covariance parameters: {0}")]
    InvalidParameter(String),

    #[error("matrix is not positive definite after jitter up to {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },

    #[error("design matrix is rank deficient")]
    SingularDesign,

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("negative predictive variance {0:e}")]
    NegativeVariance(f64),

    #[error("bootstrap unstable: {failed} of {requested} replicate fits failed")]
    BootstrapUnstable { failed: usize, requested: usize },

    #[error("optimization failed: {0}")]
    Optimization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that stem from numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::MobiusPole(_)
                | Error::NotPositiveDefinite { .. }
                | Error::SingularDesign
                | Error::NegativeVariance(_)
                | Error::BootstrapUnstable { .. }
                | Error::Optimization(_)
                | Error::DegenerateAnchors { .. }
        )
    }
}
