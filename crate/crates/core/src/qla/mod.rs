//! Dense complex linear algebra for the combined system+apparatus space.
//!
//! Everything here works on plain row-major buffers of `Complex64`. The
//! combined space V⊗W uses the system-major index convention throughout:
//! the pair (system index `a`, apparatus index `i`) maps to the flat index
//! `a * m + i` where `m = dim W`. All file formats and every operation in the
//! rest of the crate assume this convention.

mod matrix;
mod ops;
mod vector;

pub use matrix::{ComplexMatrix, C64};
pub(crate) use ops::propagator_from_eigen;
pub use ops::{
    evolution_operator, gate_projector, partial_inner_left, partial_trace_w, random_hermitian,
    random_unitary, tensor_product,
};
pub use vector::StateVector;

/// Max-entry tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Max-entry tolerance for accepting a matrix as unitary.
pub const UNITARY_TOL: f64 = 1e-10;
/// Max-entry tolerance for general numerical identity checks.
pub const IDENTITY_TOL: f64 = 1e-9;
