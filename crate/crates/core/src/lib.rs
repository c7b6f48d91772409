//! Deterministic gate-energy simulator of projective quantum measurement.
//!
//! A measurement apparatus is modeled as a set of `N` gates, one per basis
//! state of the observed system. Each gate carries a real energy. Measuring a
//! state deposits energy on every gate in proportion to the state's closeness
//! to that gate (a partial-trace projection through the combined
//! system+apparatus unitary), and the gate with the largest energy wins and
//! pays one unit back. The bookkeeping is fully deterministic, conserves the
//! energy total, and drives outcome frequencies to the Born weights with an
//! O(1/n) error bound.
//!
//! Modules:
//! - [`qla`]: dense complex linear algebra (tensor products, Hermitian
//!   evolution, projectors, partial traces).
//! - [`gates`]: the apparatus, the energy ledger, and the three-step
//!   measurement rule.
//! - [`ensemble`]: repeated-measurement statistics, frequency-convergence
//!   bounds, entangled and subspace extensions.
//! - [`cli`]: scenario configs, run reports, and the command implementations
//!   behind the `gatesim` binary.

pub mod cli;
pub mod ensemble;
pub mod error;
pub mod gates;
pub mod qla;

pub use error::Error;
