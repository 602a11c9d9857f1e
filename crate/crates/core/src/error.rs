use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("numerical blowup at step {step}: non-finite value at index {index}")]
    NumericalBlowup { step: usize, index: usize },

    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite input at index {index}")]
    NonFiniteInput { index: usize },

    #[error("separation collapsed to zero at step {step}")]
    DegenerateSeparation { step: usize },

    #[error("orthonormalization failed at step {step} for direction {direction}")]
    RankCollapse { step: usize, direction: usize },

    #[error("trajectory too short: need at least {required} rows, got {found}")]
    TooShort { required: usize, found: usize },

    #[error("{achieved_components} components explain only {achieved_ratio:.6} of the variance (wanted {tau})")]
    InsufficientRank {
        tau: f64,
        achieved_components: usize,
        achieved_ratio: f64,
    },

    #[error("malformed weights: {0}")]
    MalformedWeights(String),

    #[error("unsupported weight file version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("unsupported update rate {0}: only deterministic updates (1.0) are implemented")]
    UnsupportedUpdateRate(f64),

    #[error("malformed trajectory data: {0}")]
    MalformedTrajectory(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by the dynamics or the numerics rather than by
    /// bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalBlowup { .. }
                | Error::DegenerateSeparation { .. }
                | Error::RankCollapse { .. }
                | Error::InsufficientRank { .. }
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
