//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates an operation's precondition (non-positive rate,
    /// probability outside [0, 1], negative delay, unknown kind, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Input data violates a structural precondition (unsorted tag stream,
    /// non-uniform grid where a uniform one is required, ...).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A sampling grid is too coarse for the requested kernel.
    #[error("grid resolution too coarse: {0}")]
    Resolution(String),

    /// The printed closed-form expressions require a real square root; the
    /// discriminant went negative.
    #[error("closed form not evaluable, complex branch: {0}")]
    ComplexBranch(String),

    /// Normalization metadata missing or zero.
    #[error("division by zero: {0}")]
    DivideByZero(String),

    /// An iterative fit ran out of iterations without converging.
    #[error(
        "fit failed after {iterations} iterations (residual norm {residual_norm:.6e}): {message}"
    )]
    FitFailure {
        residual_norm: f64,
        iterations: usize,
        message: String,
    },

    /// Measured ratios admit no photon-number distribution with all
    /// probabilities in [0, 1].
    #[error("infeasible data: {0}")]
    InfeasibleData(String),

    /// Not enough usable input to produce the requested statistic.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Adaptive quadrature could not reach the requested tolerance.
    #[error("accuracy not reached: {0}")]
    Accuracy(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed file contents (bad header, unparsable field, unknown key).
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// Process exit code for the CLI: 2 usage, 3 data/format, 4 fit failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_)
            | Error::Resolution(_)
            | Error::ComplexBranch(_)
            | Error::DivideByZero(_)
            | Error::Accuracy(_) => 2,
            Error::Precondition(_)
            | Error::InfeasibleData(_)
            | Error::InsufficientData(_)
            | Error::Io(_)
            | Error::Format(_) => 3,
            Error::FitFailure { .. } => 4,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
