use thiserror::Error;

/// Errors produced by the simulation kernel.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An operation that needs a Hermitian generator got one that is not.
    #[error("matrix is not Hermitian: max |A - A\u{2020}| = {defect:.3e} exceeds {tol:.1e}")]
    NonHermitianInput { defect: f64, tol: f64 },

    /// Operand shapes are incompatible.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Gate index outside `0..count`.
    #[error("gate index {index} out of range (gate count {count})")]
    IndexOutOfRange { index: usize, count: usize },

    /// The state has (numerically) zero closeness to every gate, so the
    /// measurement cannot be normalized.
    #[error("all gates closed: total closeness {sum:.3e} is not positive")]
    AllGatesClosed { sum: f64 },

    /// A per-step frequency bound failed during a repeated run. This signals
    /// an implementation bug or a run started outside the bound's hypothesis,
    /// never a valid model state.
    #[error(
        "bound violation at step {step}, gate {gate}: \
         n*c - count = {value:.6} outside ({lower}, {upper})"
    )]
    BoundViolation {
        step: u64,
        gate: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    /// Subspace projectors are not a partition of the identity.
    #[error("projectors do not partition the space: {0}")]
    NotAPartition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
