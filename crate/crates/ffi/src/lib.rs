//! C ABI for the gatesim measurement simulator.
//!
//! Handles are opaque pointers created and freed by this library. Complex
//! buffers are interleaved doubles `[re0, im0, re1, im1, …]`, row-major for
//! matrices. Gate indices at this boundary are 0-based. Every fallible call
//! returns a [`GatesimStatus`]; out-parameters are written only on
//! `GATESIM_STATUS_OK`.

use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gatesim::ensemble::run_repeated;
use gatesim::gates::{build_apparatus, closeness, measure, Apparatus, EnergyLedger};
use gatesim::qla::{ComplexMatrix, StateVector, C64};
use gatesim::Error;

/// Result codes for every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GatesimStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument failed basic validation (zero dimension, bad hbar, ...).
    InvalidArgument = 2,
    /// The supplied generator is not Hermitian within tolerance.
    NonHermitian = 3,
    DimensionMismatch = 4,
    IndexOutOfRange = 5,
    /// The state has zero closeness to every gate.
    AllGatesClosed = 6,
    /// A per-step frequency bound failed during a repeated run.
    BoundViolation = 7,
    NotAPartition = 8,
    /// An internal panic was caught at the boundary.
    Panic = 9,
}

fn status_of(err: &Error) -> GatesimStatus {
    match err {
        Error::NonHermitianInput { .. } => GatesimStatus::NonHermitian,
        Error::DimensionMismatch(_) => GatesimStatus::DimensionMismatch,
        Error::IndexOutOfRange { .. } => GatesimStatus::IndexOutOfRange,
        Error::AllGatesClosed { .. } => GatesimStatus::AllGatesClosed,
        Error::BoundViolation { .. } => GatesimStatus::BoundViolation,
        Error::NotAPartition(_) => GatesimStatus::NotAPartition,
    }
}

fn guarded(f: impl FnOnce() -> GatesimStatus) -> GatesimStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or(GatesimStatus::Panic)
}

/// Opaque apparatus handle.
pub struct GatesimApparatus {
    inner: Apparatus,
}

/// Opaque energy-ledger handle.
pub struct GatesimLedger {
    inner: EnergyLedger,
}

unsafe fn write_handle<T>(out: *mut *mut T, value: T) -> GatesimStatus {
    if out.is_null() {
        return GatesimStatus::NullPointer;
    }
    unsafe { out.write(Box::into_raw(Box::new(value))) };
    GatesimStatus::Ok
}

unsafe fn slice_arg<'a, T>(ptr: *const T, len: usize) -> Option<&'a [T]> {
    if ptr.is_null() {
        None
    } else {
        Some(unsafe { std::slice::from_raw_parts(ptr, len) })
    }
}

unsafe fn state_arg(ptr: *const f64, dim: usize) -> Option<StateVector> {
    let raw = unsafe { slice_arg(ptr, 2 * dim) }?;
    Some(StateVector::new(
        raw.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect(),
    ))
}

fn apparatus_result(
    result: Result<Apparatus, Error>,
    out: *mut *mut GatesimApparatus,
) -> GatesimStatus {
    match result {
        Ok(inner) => unsafe { write_handle(out, GatesimApparatus { inner }) },
        Err(err) => status_of(&err),
    }
}

/// Builds the free-dynamics apparatus (zero combined Hamiltonian).
///
/// # Safety
/// `out` must be a valid location for one pointer.
#[no_mangle]
pub unsafe extern "C" fn gatesim_apparatus_trivial(
    n: usize,
    m: usize,
    hbar: f64,
    out: *mut *mut GatesimApparatus,
) -> GatesimStatus {
    guarded(|| {
        if n == 0 || m == 0 || !(hbar.is_finite() && hbar > 0.0) {
            return GatesimStatus::InvalidArgument;
        }
        apparatus_result(Ok(Apparatus::trivial(n, m, hbar)), out)
    })
}

/// Builds the ideal apparatus Ĥ = diag(levels) ⊗ I_m.
///
/// # Safety
/// `levels` must point to `n` doubles; `out` must be a valid location for
/// one pointer.
#[no_mangle]
pub unsafe extern "C" fn gatesim_apparatus_ideal(
    levels: *const f64,
    n: usize,
    m: usize,
    hbar: f64,
    out: *mut *mut GatesimApparatus,
) -> GatesimStatus {
    guarded(|| {
        if n == 0 || m == 0 || !(hbar.is_finite() && hbar > 0.0) {
            return GatesimStatus::InvalidArgument;
        }
        let Some(levels) = (unsafe { slice_arg(levels, n) }) else {
            return GatesimStatus::NullPointer;
        };
        apparatus_result(Ok(Apparatus::ideal(levels, m, hbar)), out)
    })
}

/// Builds a seeded dense random-Hermitian apparatus.
///
/// # Safety
/// `out` must be a valid location for one pointer.
#[no_mangle]
pub unsafe extern "C" fn gatesim_apparatus_random(
    n: usize,
    m: usize,
    hbar: f64,
    seed: u64,
    out: *mut *mut GatesimApparatus,
) -> GatesimStatus {
    guarded(|| {
        if n == 0 || m == 0 || !(hbar.is_finite() && hbar > 0.0) {
            return GatesimStatus::InvalidArgument;
        }
        apparatus_result(Ok(Apparatus::random(n, m, hbar, seed)), out)
    })
}

/// Builds an apparatus from an explicit combined Hamiltonian given as an
/// interleaved row-major (n·m)×(n·m) complex matrix.
///
/// # Safety
/// `entries` must point to `2·(n·m)²` doubles; `out` must be a valid
/// location for one pointer.
#[no_mangle]
pub unsafe extern "C" fn gatesim_apparatus_custom(
    entries: *const f64,
    n: usize,
    m: usize,
    hbar: f64,
    out: *mut *mut GatesimApparatus,
) -> GatesimStatus {
    guarded(|| {
        if n == 0 || m == 0 || !(hbar.is_finite() && hbar > 0.0) {
            return GatesimStatus::InvalidArgument;
        }
        let d = n * m;
        let Some(raw) = (unsafe { slice_arg(entries, 2 * d * d) }) else {
            return GatesimStatus::NullPointer;
        };
        let hhat = ComplexMatrix::from_entries(
            d,
            d,
            raw.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect(),
        );
        apparatus_result(build_apparatus(hhat, n, m, hbar), out)
    })
}

/// Frees an apparatus handle; a null pointer is a no-op.
///
/// # Safety
/// `app` must have been returned by a `gatesim_apparatus_*` constructor and
/// not freed already.
#[no_mangle]
pub unsafe extern "C" fn gatesim_apparatus_free(app: *mut GatesimApparatus) {
    if !app.is_null() {
        drop(unsafe { Box::from_raw(app) });
    }
}

/// dim V; 0 when the handle is null.
///
/// # Safety
/// `app` must be a live apparatus handle or null.
#[no_mangle]
pub unsafe extern "C" fn gatesim_apparatus_system_dim(app: *const GatesimApparatus) -> usize {
    unsafe { app.as_ref() }.map_or(0, |a| a.inner.system_dim())
}

/// dim W; 0 when the handle is null.
///
/// # Safety
/// `app` must be a live apparatus handle or null.
#[no_mangle]
pub unsafe extern "C" fn gatesim_apparatus_apparatus_dim(app: *const GatesimApparatus) -> usize {
    unsafe { app.as_ref() }.map_or(0, |a| a.inner.apparatus_dim())
}

/// Creates a ledger with the given initial gate energies.
///
/// # Safety
/// `energies` must point to `gates` doubles; `out` must be a valid location
/// for one pointer.
#[no_mangle]
pub unsafe extern "C" fn gatesim_ledger_new(
    energies: *const f64,
    gates: usize,
    out: *mut *mut GatesimLedger,
) -> GatesimStatus {
    guarded(|| {
        if gates == 0 {
            return GatesimStatus::InvalidArgument;
        }
        let Some(init) = (unsafe { slice_arg(energies, gates) }) else {
            return GatesimStatus::NullPointer;
        };
        if init.iter().any(|x| !x.is_finite()) {
            return GatesimStatus::InvalidArgument;
        }
        unsafe {
            write_handle(
                out,
                GatesimLedger {
                    inner: EnergyLedger::new(init.to_vec()),
                },
            )
        }
    })
}

/// Creates a zero-energy ledger with `gates` gates.
///
/// # Safety
/// `out` must be a valid location for one pointer.
#[no_mangle]
pub unsafe extern "C" fn gatesim_ledger_zeros(
    gates: usize,
    out: *mut *mut GatesimLedger,
) -> GatesimStatus {
    guarded(|| {
        if gates == 0 {
            return GatesimStatus::InvalidArgument;
        }
        unsafe {
            write_handle(
                out,
                GatesimLedger {
                    inner: EnergyLedger::zeros(gates),
                },
            )
        }
    })
}

/// Frees a ledger handle; a null pointer is a no-op.
///
/// # Safety
/// `ledger` must have been returned by a ledger constructor and not freed
/// already.
#[no_mangle]
pub unsafe extern "C" fn gatesim_ledger_free(ledger: *mut GatesimLedger) {
    if !ledger.is_null() {
        drop(unsafe { Box::from_raw(ledger) });
    }
}

/// Number of gates; 0 when the handle is null.
///
/// # Safety
/// `ledger` must be a live ledger handle or null.
#[no_mangle]
pub unsafe extern "C" fn gatesim_ledger_gate_count(ledger: *const GatesimLedger) -> usize {
    unsafe { ledger.as_ref() }.map_or(0, |l| l.inner.gate_count())
}

/// Copies the current gate energies into `out_energies`.
///
/// # Safety
/// `ledger` must be a live handle; `out_energies` must point to
/// `gatesim_ledger_gate_count(ledger)` doubles.
#[no_mangle]
pub unsafe extern "C" fn gatesim_ledger_energies(
    ledger: *const GatesimLedger,
    out_energies: *mut f64,
) -> GatesimStatus {
    guarded(|| {
        let Some(l) = (unsafe { ledger.as_ref() }) else {
            return GatesimStatus::NullPointer;
        };
        if out_energies.is_null() {
            return GatesimStatus::NullPointer;
        }
        let src = l.inner.energies();
        unsafe { ptr::copy_nonoverlapping(src.as_ptr(), out_energies, src.len()) };
        GatesimStatus::Ok
    })
}

/// The conserved energy total C.
///
/// # Safety
/// `ledger` must be a live handle; `out_total` must be a valid location for
/// one double.
#[no_mangle]
pub unsafe extern "C" fn gatesim_ledger_total(
    ledger: *const GatesimLedger,
    out_total: *mut f64,
) -> GatesimStatus {
    guarded(|| {
        let Some(l) = (unsafe { ledger.as_ref() }) else {
            return GatesimStatus::NullPointer;
        };
        if out_total.is_null() {
            return GatesimStatus::NullPointer;
        }
        unsafe { out_total.write(l.inner.total()) };
        GatesimStatus::Ok
    })
}

/// Number of completed measurements on this ledger.
///
/// # Safety
/// `ledger` must be a live ledger handle or null.
#[no_mangle]
pub unsafe extern "C" fn gatesim_ledger_history_len(ledger: *const GatesimLedger) -> u64 {
    unsafe { ledger.as_ref() }.map_or(0, |l| l.inner.history_len())
}

/// Closeness of a state to every gate (no normalization): c_j = ‖M_j ξ‖².
///
/// # Safety
/// `state` must point to `2·n` doubles (interleaved complex, n = system
/// dim); `out_closeness` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn gatesim_closeness(
    app: *const GatesimApparatus,
    state: *const f64,
    out_closeness: *mut f64,
) -> GatesimStatus {
    guarded(|| {
        let Some(a) = (unsafe { app.as_ref() }) else {
            return GatesimStatus::NullPointer;
        };
        let n = a.inner.system_dim();
        let Some(xi) = (unsafe { state_arg(state, n) }) else {
            return GatesimStatus::NullPointer;
        };
        if out_closeness.is_null() {
            return GatesimStatus::NullPointer;
        }
        match closeness(&a.inner, &xi) {
            Ok(c) => {
                unsafe { ptr::copy_nonoverlapping(c.as_ptr(), out_closeness, c.len()) };
                GatesimStatus::Ok
            }
            Err(err) => status_of(&err),
        }
    })
}

/// Performs one measurement: deposits normalized closeness on the ledger,
/// selects the winning gate, charges it one unit.
///
/// Writes the 0-based chosen gate to `out_chosen`. When `out_closeness` is
/// non-null it receives the normalized closeness vector (n doubles).
///
/// # Safety
/// `app` and `ledger` must be live handles with matching gate counts;
/// `state` must point to `2·n` doubles; `out_chosen` must be a valid
/// location for one `usize`; `out_closeness` must be null or point to `n`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn gatesim_measure(
    app: *const GatesimApparatus,
    ledger: *mut GatesimLedger,
    state: *const f64,
    out_chosen: *mut usize,
    out_closeness: *mut f64,
) -> GatesimStatus {
    guarded(|| {
        let Some(a) = (unsafe { app.as_ref() }) else {
            return GatesimStatus::NullPointer;
        };
        let Some(l) = (unsafe { ledger.as_mut() }) else {
            return GatesimStatus::NullPointer;
        };
        let n = a.inner.system_dim();
        let Some(xi) = (unsafe { state_arg(state, n) }) else {
            return GatesimStatus::NullPointer;
        };
        if out_chosen.is_null() {
            return GatesimStatus::NullPointer;
        }
        match measure(&a.inner, &mut l.inner, &xi) {
            Ok(outcome) => {
                unsafe { out_chosen.write(outcome.chosen) };
                if !out_closeness.is_null() {
                    unsafe {
                        ptr::copy_nonoverlapping(
                            outcome.closeness.as_ptr(),
                            out_closeness,
                            outcome.closeness.len(),
                        )
                    };
                }
                GatesimStatus::Ok
            }
            Err(err) => status_of(&err),
        }
    })
}

/// Measures the same state `steps` times on one ledger, checking the
/// per-step frequency bounds.
///
/// `out_counts` receives per-gate selection counts (n entries). When
/// `out_max_deviation` is non-null it receives the largest |n′·c_j − n_j|
/// over all prefixes.
///
/// # Safety
/// `app` and `ledger` must be live handles with matching gate counts;
/// `state` must point to `2·n` doubles; `out_counts` must point to `n`
/// `uint64_t`; `out_max_deviation` must be null or a valid location for one
/// double.
#[no_mangle]
pub unsafe extern "C" fn gatesim_run_repeated(
    app: *const GatesimApparatus,
    ledger: *mut GatesimLedger,
    state: *const f64,
    steps: u64,
    out_counts: *mut u64,
    out_max_deviation: *mut f64,
) -> GatesimStatus {
    guarded(|| {
        let Some(a) = (unsafe { app.as_ref() }) else {
            return GatesimStatus::NullPointer;
        };
        let Some(l) = (unsafe { ledger.as_mut() }) else {
            return GatesimStatus::NullPointer;
        };
        let n = a.inner.system_dim();
        let Some(xi) = (unsafe { state_arg(state, n) }) else {
            return GatesimStatus::NullPointer;
        };
        if out_counts.is_null() {
            return GatesimStatus::NullPointer;
        }
        match run_repeated(&a.inner, &mut l.inner, &xi, steps) {
            Ok(stats) => {
                unsafe {
                    ptr::copy_nonoverlapping(stats.counts.as_ptr(), out_counts, stats.counts.len())
                };
                if !out_max_deviation.is_null() {
                    unsafe { out_max_deviation.write(stats.max_deviation) };
                }
                GatesimStatus::Ok
            }
            Err(err) => status_of(&err),
        }
    })
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn gatesim_status_message(status: GatesimStatus) -> *const c_char {
    let msg: &'static CStr = match status {
        GatesimStatus::Ok => c"ok",
        GatesimStatus::NullPointer => c"null pointer argument",
        GatesimStatus::InvalidArgument => c"invalid argument",
        GatesimStatus::NonHermitian => c"matrix is not Hermitian",
        GatesimStatus::DimensionMismatch => c"dimension mismatch",
        GatesimStatus::IndexOutOfRange => c"gate index out of range",
        GatesimStatus::AllGatesClosed => c"state has zero closeness to every gate",
        GatesimStatus::BoundViolation => c"per-step frequency bound violated",
        GatesimStatus::NotAPartition => c"projectors do not partition the space",
        GatesimStatus::Panic => c"internal panic",
    };
    msg.as_ptr()
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gatesim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
