use thiserror::Error;

/// Library-wide error type. Non-invertibility encountered by `layered_invert`
/// is reported in an `InvertibilityReport`, not here; these variants are for
/// contract violations and failed preconditions.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("mixed exact/float operands: {0}")]
    ModeMismatch(String),
    #[error("matrix is not invertible: {0}")]
    NotInvertible(String),
    #[error("matrix is not Hermitian within tolerance")]
    NotHermitian,
    #[error("eigenvalue {0} below the negativity tolerance")]
    NegativeEigenvalue(f64),
    #[error("operation unavailable in exact mode: {0}")]
    ExactModeUnsupported(&'static str),
    #[error("point outside the function's domain: {0}")]
    DomainError(String),
    #[error("no scaling-ladder entry lands in the domain")]
    AdmissibilityError,
    #[error("block pattern violated: {0}")]
    StructureError(String),
    #[error("evaluation outside the original domain needs a similarity witness")]
    WitnessRequired,
    #[error("frames are not transversal")]
    NotTransversal,
    #[error("entries leave the configured subalgebra")]
    NotInSubalgebra,
    #[error("operator is not a pure contraction (largest singular value {0})")]
    NotPureContraction(f64),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("flag signatures are not compatible: {0}")]
    SignatureMismatch(String),
    #[error("unknown suite {0:?}")]
    UnknownSuite(String),
    #[error("bad input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
