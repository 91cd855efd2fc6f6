//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("matrix contains NaN or infinite entries")]
    NonFinite,

    #[error("matrix is not Hermitian (asymmetry norm {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semi-definite (eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("parameter {theta} outside the open domain ({lo}, {hi})")]
    OutOfDomain { theta: f64, lo: f64, hi: f64 },

    #[error("invalid quantum state: {0}")]
    InvalidState(String),

    #[error("the operation requires a pure input state")]
    NotPure,

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "eigenvector overlap matching ambiguous at theta {theta}: candidates {first} and {second}"
    )]
    Degeneracy {
        theta: f64,
        first: usize,
        second: usize,
    },

    #[error("divergent Fisher term for outcome '{outcome}': probability below floor but derivative term is not")]
    DivergentFisherTerm { outcome: String },

    #[error("grid too coarse: got {points} points, need at least {needed}")]
    GridTooCoarse { points: usize, needed: usize },

    #[error("outcome probabilities sum to {0}, too far from 1 to renormalize")]
    Normalization(f64),

    #[error("likelihood vanishes everywhere on the domain for the observed counts")]
    AllZeroLikelihood,

    #[error("generator is not anti-Hermitian (defect norm {0:.3e})")]
    NotAntiHermitian(f64),

    #[error("Kraus set is not canonical for this input state (off-diagonal Gram weight {0:.3e})")]
    NotCanonical(f64),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 validation, 3 numeric/runtime,
    /// 4 divergent Fisher term.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DivergentFisherTerm { .. } => 4,
            Error::OutOfDomain { .. }
            | Error::InvalidState(_)
            | Error::InvalidPovm(_)
            | Error::InvalidChannel(_)
            | Error::InvalidConfig(_)
            | Error::GridTooCoarse { .. }
            | Error::NotPure => 2,
            _ => 3,
        }
    }

    /// Short machine-parsable code used in CLI error lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::NonFinite => "non-finite",
            Error::NotHermitian(_) => "not-hermitian",
            Error::NotPsd(_) => "not-psd",
            Error::Numeric(_) => "numeric",
            Error::OutOfDomain { .. } => "out-of-domain",
            Error::InvalidState(_) => "invalid-state",
            Error::NotPure => "not-pure",
            Error::InvalidPovm(_) => "invalid-povm",
            Error::InvalidChannel(_) => "invalid-channel",
            Error::InvalidConfig(_) => "invalid-config",
            Error::Degeneracy { .. } => "degeneracy",
            Error::DivergentFisherTerm { .. } => "divergent-fisher-term",
            Error::GridTooCoarse { .. } => "grid-too-coarse",
            Error::Normalization(_) => "normalization",
            Error::AllZeroLikelihood => "all-zero-likelihood",
            Error::NotAntiHermitian(_) => "not-anti-hermitian",
            Error::NotCanonical(_) => "not-canonical",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
