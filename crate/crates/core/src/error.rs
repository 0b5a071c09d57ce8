use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("tensor product would hold {entries} entries, above the cap of {cap}")]
    Capacity { entries: usize, cap: usize },

    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("unphysical two-state: |<psi2|psi1>| = {overlap:.3e} violates the non-orthogonality restriction")]
    Unphysical { overlap: f64 },

    #[error("unphysical multiple-state: conditions {interval} and {next} are orthogonal (|overlap| = {overlap:.3e})", next = .interval + 1)]
    UnphysicalInterval { interval: usize, overlap: f64 },

    #[error("two-state has zero norm")]
    ZeroNorm,

    #[error("label {label} out of range for dimension {dim}")]
    InvalidLabel { label: usize, dim: usize },

    #[error("invalid two-state basis: {0}")]
    InvalidBasis(String),

    #[error("post-selection incompatible with every outcome")]
    PostSelectionIncompatible,

    #[error("near-orthogonal conditions: |tr rho| = {trace:.3e}")]
    NearOrthogonal { trace: f64 },

    #[error("lattice: {0}")]
    Lattice(String),

    #[error("oracle: {0}")]
    Oracle(String),
}
