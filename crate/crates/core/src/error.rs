use alloc::string::String;

/// Errors raised while building states and operators.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("mode registry must contain at least one mode")]
    EmptyRegistry,
    #[error("duplicate mode label `{0}`")]
    DuplicateLabel(String),
    #[error("unknown mode label `{0}`")]
    UnknownLabel(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("covariance asymmetric by {deviation:e} (tolerance 1e-9)")]
    AsymmetricCovariance { deviation: f64 },
    #[error("matrix is not symplectic: max |S Ω Sᵀ - Ω| = {deviation:e}")]
    NotSymplectic { deviation: f64 },
    #[error("mode wiring mismatch: {0}")]
    WiringMismatch(String),
    #[error("invalid value {value} for `{name}`")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("expected a {expected} wave plate")]
    WrongPlateKind { expected: &'static str },
    #[error("state is not physical: minimum symplectic eigenvalue {min_symplectic_eigenvalue}")]
    NotPhysical { min_symplectic_eigenvalue: f64 },
    #[error("covariance matrix is not positive semi-definite")]
    NotPositiveSemidefinite,
}

pub type Result<T> = core::result::Result<T, Error>;
