use thiserror::Error;

/// Errors raised by the numerical operations of this crate.
///
/// Variants split into two families: invalid arguments, which are caller
/// mistakes, and numerical precondition failures, which mean the requested
/// discretization cannot deliver the stated accuracy and the caller has to
/// enlarge or refine it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("norm of t*A is {norm:.3e}, above the overflow guard {limit}")]
    NormTooLarge { norm: f64, limit: f64 },

    #[error("non-finite value {value} at node {node:?}")]
    NonFinite { node: Vec<f64>, value: f64 },

    #[error("TailTruncation: estimated mass outside the box {tail_mass:.3e} exceeds {tolerance:.1e} (box mass {mass:.12})")]
    TailTruncation {
        mass: f64,
        tail_mass: f64,
        tolerance: f64,
    },

    #[error("AliasRisk: characteristic function is {value:.3e} at the Nyquist frequency (limit {limit:.1e})")]
    AliasRisk { value: f64, limit: f64 },

    #[error("DomainEscape: working box needs {needed} points per axis, budget is {budget}")]
    DomainEscape { needed: usize, budget: usize },

    #[error("UnderResolved: smoothing scale {scale:.3e} is below {required:.3e} (4 grid spacings)")]
    UnderResolved { scale: f64, required: f64 },

    #[error("NoPlateau: sup did not stabilize up to radius {radius} (last values {previous}, {last})")]
    NoPlateau {
        radius: f64,
        previous: f64,
        last: f64,
    },
}

impl Error {
    /// Short machine-readable name, used on the CLI diagnostic stream.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::NotSquare { .. } => "NotSquare",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NormTooLarge { .. } => "NormTooLarge",
            Error::NonFinite { .. } => "NonFinite",
            Error::TailTruncation { .. } => "TailTruncation",
            Error::AliasRisk { .. } => "AliasRisk",
            Error::DomainEscape { .. } => "DomainEscape",
            Error::UnderResolved { .. } => "UnderResolved",
            Error::NoPlateau { .. } => "NoPlateau",
        }
    }

    /// True for failures of a numerical precondition (as opposed to bad input).
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::TailTruncation { .. }
                | Error::AliasRisk { .. }
                | Error::DomainEscape { .. }
                | Error::UnderResolved { .. }
                | Error::NoPlateau { .. }
                | Error::NormTooLarge { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
