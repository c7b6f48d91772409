/* C interface to the gatesim measurement simulator. */

#ifndef GATESIM_H
#define GATESIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes for every fallible call.
 */
typedef enum GatesimStatus {
  GATESIM_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  GATESIM_STATUS_NULL_POINTER = 1,
  /**
   * An argument failed basic validation (zero dimension, bad hbar, ...).
   */
  GATESIM_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The supplied generator is not Hermitian within tolerance.
   */
  GATESIM_STATUS_NON_HERMITIAN = 3,
  GATESIM_STATUS_DIMENSION_MISMATCH = 4,
  GATESIM_STATUS_INDEX_OUT_OF_RANGE = 5,
  /**
   * The state has zero closeness to every gate.
   */
  GATESIM_STATUS_ALL_GATES_CLOSED = 6,
  /**
   * A per-step frequency bound failed during a repeated run.
   */
  GATESIM_STATUS_BOUND_VIOLATION = 7,
  GATESIM_STATUS_NOT_A_PARTITION = 8,
  /**
   * An internal panic was caught at the boundary.
   */
  GATESIM_STATUS_PANIC = 9,
} GatesimStatus;

/**
 * Opaque apparatus handle.
 */
typedef struct GatesimApparatus GatesimApparatus;

/**
 * Opaque energy-ledger handle.
 */
typedef struct GatesimLedger GatesimLedger;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds the free-dynamics apparatus (zero combined Hamiltonian).
 *
 * # Safety
 * `out` must be a valid location for one pointer.
 */
enum GatesimStatus gatesim_apparatus_trivial(uintptr_t n,
                                             uintptr_t m,
                                             double hbar,
                                             struct GatesimApparatus **out);

/**
 * Builds the ideal apparatus Ĥ = diag(levels) ⊗ I_m.
 *
 * # Safety
 * `levels` must point to `n` doubles; `out` must be a valid location for
 * one pointer.
 */
enum GatesimStatus gatesim_apparatus_ideal(const double *levels,
                                           uintptr_t n,
                                           uintptr_t m,
                                           double hbar,
                                           struct GatesimApparatus **out);

/**
 * Builds a seeded dense random-Hermitian apparatus.
 *
 * # Safety
 * `out` must be a valid location for one pointer.
 */
enum GatesimStatus gatesim_apparatus_random(uintptr_t n,
                                            uintptr_t m,
                                            double hbar,
                                            uint64_t seed,
                                            struct GatesimApparatus **out);

/**
 * Builds an apparatus from an explicit combined Hamiltonian given as an
 * interleaved row-major (n·m)×(n·m) complex matrix.
 *
 * # Safety
 * `entries` must point to `2·(n·m)²` doubles; `out` must be a valid
 * location for one pointer.
 */
enum GatesimStatus gatesim_apparatus_custom(const double *entries,
                                            uintptr_t n,
                                            uintptr_t m,
                                            double hbar,
                                            struct GatesimApparatus **out);

/**
 * Frees an apparatus handle; a null pointer is a no-op.
 *
 * # Safety
 * `app` must have been returned by a `gatesim_apparatus_*` constructor and
 * not freed already.
 */
void gatesim_apparatus_free(struct GatesimApparatus *app);

/**
 * dim V; 0 when the handle is null.
 *
 * # Safety
 * `app` must be a live apparatus handle or null.
 */
uintptr_t gatesim_apparatus_system_dim(const struct GatesimApparatus *app);

/**
 * dim W; 0 when the handle is null.
 *
 * # Safety
 * `app` must be a live apparatus handle or null.
 */
uintptr_t gatesim_apparatus_apparatus_dim(const struct GatesimApparatus *app);

/**
 * Creates a ledger with the given initial gate energies.
 *
 * # Safety
 * `energies` must point to `gates` doubles; `out` must be a valid location
 * for one pointer.
 */
enum GatesimStatus gatesim_ledger_new(const double *energies,
                                      uintptr_t gates,
                                      struct GatesimLedger **out);

/**
 * Creates a zero-energy ledger with `gates` gates.
 *
 * # Safety
 * `out` must be a valid location for one pointer.
 */
enum GatesimStatus gatesim_ledger_zeros(uintptr_t gates, struct GatesimLedger **out);

/**
 * Frees a ledger handle; a null pointer is a no-op.
 *
 * # Safety
 * `ledger` must have been returned by a ledger constructor and not freed
 * already.
 */
void gatesim_ledger_free(struct GatesimLedger *ledger);

/**
 * Number of gates; 0 when the handle is null.
 *
 * # Safety
 * `ledger` must be a live ledger handle or null.
 */
uintptr_t gatesim_ledger_gate_count(const struct GatesimLedger *ledger);

/**
 * Copies the current gate energies into `out_energies`.
 *
 * # Safety
 * `ledger` must be a live handle; `out_energies` must point to
 * `gatesim_ledger_gate_count(ledger)` doubles.
 */
enum GatesimStatus gatesim_ledger_energies(const struct GatesimLedger *ledger,
                                           double *out_energies);

/**
 * The conserved energy total C.
 *
 * # Safety
 * `ledger` must be a live handle; `out_total` must be a valid location for
 * one double.
 */
enum GatesimStatus gatesim_ledger_total(const struct GatesimLedger *ledger, double *out_total);

/**
 * Number of completed measurements on this ledger.
 *
 * # Safety
 * `ledger` must be a live ledger handle or null.
 */
uint64_t gatesim_ledger_history_len(const struct GatesimLedger *ledger);

/**
 * Closeness of a state to every gate (no normalization): c_j = ‖M_j ξ‖².
 *
 * # Safety
 * `state` must point to `2·n` doubles (interleaved complex, n = system
 * dim); `out_closeness` must point to `n` doubles.
 */
enum GatesimStatus gatesim_closeness(const struct GatesimApparatus *app,
                                     const double *state,
                                     double *out_closeness);

/**
 * Performs one measurement: deposits normalized closeness on the ledger,
 * selects the winning gate, charges it one unit.
 *
 * Writes the 0-based chosen gate to `out_chosen`. When `out_closeness` is
 * non-null it receives the normalized closeness vector (n doubles).
 *
 * # Safety
 * `app` and `ledger` must be live handles with matching gate counts;
 * `state` must point to `2·n` doubles; `out_chosen` must be a valid
 * location for one `usize`; `out_closeness` must be null or point to `n`
 * doubles.
 */
enum GatesimStatus gatesim_measure(const struct GatesimApparatus *app,
                                   struct GatesimLedger *ledger,
                                   const double *state,
                                   uintptr_t *out_chosen,
                                   double *out_closeness);

/**
 * Measures the same state `steps` times on one ledger, checking the
 * per-step frequency bounds.
 *
 * `out_counts` receives per-gate selection counts (n entries). When
 * `out_max_deviation` is non-null it receives the largest |n′·c_j − n_j|
 * over all prefixes.
 *
 * # Safety
 * `app` and `ledger` must be live handles with matching gate counts;
 * `state` must point to `2·n` doubles; `out_counts` must point to `n`
 * `uint64_t`; `out_max_deviation` must be null or a valid location for one
 * double.
 */
enum GatesimStatus gatesim_run_repeated(const struct GatesimApparatus *app,
                                        struct GatesimLedger *ledger,
                                        const double *state,
                                        uint64_t steps,
                                        uint64_t *out_counts,
                                        double *out_max_deviation);

/**
 * Static description of a status code.
 */
const char *gatesim_status_message(enum GatesimStatus status);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gatesim_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GATESIM_H */
