use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty set of matrices")]
    EmptySet,

    #[error("binary PCM enumeration requires {required} mergings, cap is {cap}")]
    BinaryEnumerationLimitExceeded { required: u128, cap: u128 },

    #[error("partitioning mismatch: {0}")]
    PartitioningMismatch(String),

    #[error("non-convex domain rejected (pass unsound mode to override)")]
    NonConvexDomainRejected,

    #[error("activation does not support WIVP solving: {0}")]
    WivpUnsupportedActivation(String),

    #[error("bisection failed to converge after {0} iterations")]
    NoConvergence(usize),

    #[error("negative input entry at index {0} inside a merged block")]
    NegativeInput(usize),

    #[error("representative component {index} = {value} outside block range [{lo}, {hi}]")]
    RepresentativeOutOfRange {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("witness construction failed at layer {layer}: {reason}")]
    WitnessFailed { layer: usize, reason: String },

    #[error("exact membership unsupported for this network shape: {0}")]
    UnsupportedExactMembership(String),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("cannot certify a finite lower bound on activation outputs: {0}")]
    UnboundedActivation(String),

    #[error("no carry weight k with shifted activation value 1 in layer {0}")]
    CarryUnsolvable(usize),

    #[error("invalid lower bound {0}: must be <= 0")]
    InvalidBound(f64),

    #[error("non-monotone activation in interval forward propagation: {0}")]
    NonMonotoneActivation(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),
}

pub type Result<T> = std::result::Result<T, Error>;
