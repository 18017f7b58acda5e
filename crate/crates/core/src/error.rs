use thiserror::Error;

/// Errors raised by the library.
///
/// Every variant carries enough context to name the offending value; the CLI
/// surfaces these messages verbatim.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid interval [{lo}, {hi}]: endpoints must be finite with lo <= hi")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("value {value} lies outside [{lo}, {hi}]")]
    OutOfDomain { value: f64, lo: f64, hi: f64 },

    #[error("measure has no atoms")]
    EmptySupport,

    #[error("atoms: {0}")]
    InvalidAtoms(String),

    #[error("non-finite value {value} at {at}")]
    NonFiniteValue { value: f64, at: f64 },

    #[error("generator is not strictly monotone on [{lo}, {hi}]: {reason}")]
    NotMonotone { lo: f64, hi: f64, reason: String },

    #[error("invalid generator: {0}")]
    InvalidGenerator(String),

    #[error("value {value} outside generator range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("root finder did not converge after {iterations} iterations")]
    ConvergenceFailure { iterations: usize },

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("mean {value} escapes support hull [{lo}, {hi}] by more than the clamping tolerance")]
    MeanOutOfBounds { value: f64, lo: f64, hi: f64 },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("invalid family: {0}")]
    InvalidFamily(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("iteration cap of {cap} exceeded")]
    CapExceeded { cap: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
