use alloc::string::String;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("local term `{label}` has operator norm {norm:.6} > 1")]
    NormExceeded { label: String, norm: f64 },
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
    #[error("missing parameter `{0}`")]
    MissingParameter(String),
    #[error("Kraus operators violate completeness (deviation {0:.3e})")]
    Incomplete(f64),
    #[error("eigensolver failed to converge")]
    NoConvergence,
    #[error("Hilbert-space dimension {dim} exceeds the cap {cap}")]
    TooLarge { dim: usize, cap: usize },
    #[error("Gaussian reference is degenerate: energy variance {0:.3e} is zero")]
    DegenerateGaussian(f64),
    #[error("regions overlap at site {0}")]
    Overlap(usize),
    #[error("state is invalid: {0}")]
    InvalidState(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
