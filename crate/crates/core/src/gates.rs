//! The measurement model: apparatus construction, gate trace operators,
//! closeness, and the three-step energy-ledger selection rule.
//!
//! A gate is one exit of the apparatus, one per system basis vector. Its
//! trace operator `M_j = Tr_W(P_j · Û(1))` maps a system state to the part
//! of its evolved extension that leaves through gate `j`; the squared norm
//! `‖M_j ξ‖²` is the closeness of ξ to that gate. Measuring deposits the
//! normalized closeness on every gate's energy, then the gate with the
//! largest energy wins and pays one unit back.

use crate::error::{Error, Result};
use crate::qla::{
    gate_projector, partial_trace_w, random_hermitian, tensor_product, ComplexMatrix, StateVector,
    C64, HERMITIAN_TOL,
};

/// Closeness at or below this threshold counts as an exact zero for gate
/// disregarding and for the all-gates-closed check. The exact-zero condition
/// of the selection rule is unattainable in floating point.
pub const ZERO_CLOSENESS: f64 = 1e-14;

/// Energies within this distance are treated as equal before the index rule
/// breaks the tie, so decimal closeness values that should tie do tie despite
/// rounding.
pub const TIE_SNAP: f64 = 1e-12;

/// Threshold under which [`independence_residual`] declares compatibility.
pub const INDEPENDENCE_TOL: f64 = 1e-10;

/// Combined system+apparatus model with precomputed propagator and per-gate
/// trace operators.
#[derive(Debug, Clone)]
pub struct Apparatus {
    n: usize,
    m: usize,
    hbar: f64,
    hhat: ComplexMatrix,
    eigvals: Vec<f64>,
    eigvecs: ComplexMatrix,
    u1: ComplexMatrix,
    gate_ops: Vec<ComplexMatrix>,
}

/// Builds the apparatus from a Hermitian combined Hamiltonian on V⊗W.
///
/// Precomputes `Û(1)` and every gate trace operator `M_j = Tr_W(P_j · Û(1))`.
pub fn build_apparatus(hhat: ComplexMatrix, n: usize, m: usize, hbar: f64) -> Result<Apparatus> {
    assert!(hbar > 0.0, "hbar must be positive");
    if n == 0 || m == 0 || hhat.rows() != n * m || hhat.cols() != n * m {
        return Err(Error::DimensionMismatch(format!(
            "combined Hamiltonian must be {d}x{d} for N={n}, m={m}; got {}x{}",
            hhat.rows(),
            hhat.cols(),
            d = n * m,
        )));
    }
    let defect = hhat.hermitian_defect();
    if defect > HERMITIAN_TOL {
        return Err(Error::NonHermitianInput {
            defect,
            tol: HERMITIAN_TOL,
        });
    }
    let (eigvals, eigvecs) = hhat.hermitian_eigen();
    let u1 = crate::qla::propagator_from_eigen(&eigvals, &eigvecs, 1.0, hbar);
    let mut gate_ops = Vec::with_capacity(n);
    for j in 0..n {
        let p = gate_projector(j, n, m)?;
        gate_ops.push(partial_trace_w(&p.matmul(&u1), n, m)?);
    }
    Ok(Apparatus {
        n,
        m,
        hbar,
        hhat,
        eigvals,
        eigvecs,
        u1,
        gate_ops,
    })
}

impl Apparatus {
    /// Free dynamics: Ĥ = 0, so Û(1) = I and `M_j = m·|v_j⟩⟨v_j|`.
    pub fn trivial(n: usize, m: usize, hbar: f64) -> Apparatus {
        build_apparatus(ComplexMatrix::zeros(n * m, n * m), n, m, hbar)
            .expect("zero Hamiltonian is always valid")
    }

    /// Ĥ = H_S ⊗ I_m with diagonal system levels. Closeness is then
    /// proportional to the Born weights |⟨v_j, ξ⟩|².
    pub fn ideal(system_levels: &[f64], m: usize, hbar: f64) -> Apparatus {
        let n = system_levels.len();
        let hs = ComplexMatrix::from_real_diagonal(system_levels);
        let hhat = tensor_product(&hs, &ComplexMatrix::identity(m));
        build_apparatus(hhat, n, m, hbar).expect("product of diagonals is Hermitian")
    }

    /// Ĥ = H_S ⊗ I_m + I_N ⊗ H_M with diagonal factors.
    pub fn product(system_levels: &[f64], apparatus_levels: &[f64], hbar: f64) -> Apparatus {
        let n = system_levels.len();
        let m = apparatus_levels.len();
        let hs = ComplexMatrix::from_real_diagonal(system_levels);
        let hm = ComplexMatrix::from_real_diagonal(apparatus_levels);
        let hhat = tensor_product(&hs, &ComplexMatrix::identity(m))
            .add(&tensor_product(&ComplexMatrix::identity(n), &hm));
        build_apparatus(hhat, n, m, hbar).expect("sum of Hermitian products is Hermitian")
    }

    /// Seeded dense Hermitian Ĥ on the combined space.
    pub fn random(n: usize, m: usize, hbar: f64, seed: u64) -> Apparatus {
        build_apparatus(random_hermitian(n * m, seed), n, m, hbar)
            .expect("random Hermitian construction is exact")
    }

    pub fn system_dim(&self) -> usize {
        self.n
    }

    pub fn apparatus_dim(&self) -> usize {
        self.m
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hhat
    }

    pub fn u1(&self) -> &ComplexMatrix {
        &self.u1
    }

    /// The gate trace operators M_j, in gate order.
    pub fn gate_ops(&self) -> &[ComplexMatrix] {
        &self.gate_ops
    }

    pub fn gate_op(&self, j: usize) -> Result<&ComplexMatrix> {
        self.gate_ops.get(j).ok_or(Error::IndexOutOfRange {
            index: j,
            count: self.n,
        })
    }

    /// Û(t) from the cached eigendecomposition of Ĥ.
    pub fn propagator(&self, t: f64) -> ComplexMatrix {
        crate::qla::propagator_from_eigen(&self.eigvals, &self.eigvecs, t, self.hbar)
    }
}

/// The mutable vector of gate energies with its conserved total.
///
/// Per-gate accumulation is Kahan-compensated so the conservation defect
/// stays far below the allowed `1e-9 · (measurements + 1)` over million-step
/// runs.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger {
    rho: Vec<f64>,
    comp: Vec<f64>,
    total: f64,
    history_len: u64,
}

impl EnergyLedger {
    pub fn new(initial: Vec<f64>) -> Self {
        assert!(!initial.is_empty(), "ledger needs at least one gate");
        let total = neumaier_sum(&initial);
        let n = initial.len();
        Self {
            rho: initial,
            comp: vec![0.0; n],
            total,
            history_len: 0,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![0.0; n])
    }

    pub fn gate_count(&self) -> usize {
        self.rho.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.rho
    }

    pub fn energy(&self, j: usize) -> f64 {
        self.rho[j]
    }

    /// The conserved total C, fixed at construction.
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Number of completed measurements on this ledger.
    pub fn history_len(&self) -> u64 {
        self.history_len
    }

    /// Current Σ ρ_j.
    pub fn sum(&self) -> f64 {
        neumaier_sum(&self.rho)
    }

    /// |Σ ρ_j − C|.
    pub fn conservation_defect(&self) -> f64 {
        (self.sum() - self.total).abs()
    }

    pub(crate) fn add(&mut self, j: usize, x: f64) {
        let y = x - self.comp[j];
        let t = self.rho[j] + y;
        self.comp[j] = (t - self.rho[j]) - y;
        self.rho[j] = t;
    }

    pub(crate) fn bump_history(&mut self) {
        self.history_len += 1;
    }
}

pub(crate) fn neumaier_sum(xs: &[f64]) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for &x in xs {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

/// Record of a single measurement.
#[derive(Debug, Clone)]
pub struct MeasurementOutcome {
    /// Normalized closeness vector (sums to 1).
    pub closeness: Vec<f64>,
    /// Winning gate, 0-based.
    pub chosen: usize,
    /// Post-measurement system state v_{chosen}.
    pub collapsed_state: StateVector,
    /// Gate energies before the measurement.
    pub ledger_before: Vec<f64>,
    /// Gate energies after the measurement.
    pub ledger_after: Vec<f64>,
    /// Gates with (numerically) zero closeness, excluded from selection.
    pub disregarded: Vec<usize>,
}

/// Closeness of ξ to every gate: c_j = ‖M_j ξ‖², no normalization applied.
pub fn closeness(app: &Apparatus, xi: &StateVector) -> Result<Vec<f64>> {
    if xi.dim() != app.n {
        return Err(Error::DimensionMismatch(format!(
            "state has dim {}, apparatus system dim is {}",
            xi.dim(),
            app.n
        )));
    }
    Ok(app
        .gate_ops
        .iter()
        .map(|m_j| xi.apply(m_j).norm_sqr())
        .collect())
}

/// Rescales ξ so the closeness vector sums to 1 and returns both.
pub fn normalize_for_measurement(
    app: &Apparatus,
    xi: &StateVector,
) -> Result<(StateVector, Vec<f64>)> {
    let raw = closeness(app, xi)?;
    normalize_closeness(xi, raw)
}

pub(crate) fn normalize_closeness(
    xi: &StateVector,
    raw: Vec<f64>,
) -> Result<(StateVector, Vec<f64>)> {
    let sum = neumaier_sum(&raw);
    if sum <= ZERO_CLOSENESS {
        return Err(Error::AllGatesClosed { sum });
    }
    let scaled = xi.scale(C64::new(1.0 / sum.sqrt(), 0.0));
    let normalized = raw.into_iter().map(|c| c / sum).collect();
    Ok((scaled, normalized))
}

/// Total order on (gate, energy) pairs: larger energy wins; energies within
/// [`TIE_SNAP`] count as equal and the larger index wins.
pub fn gate_greater(j: usize, rho_j: f64, k: usize, rho_k: f64) -> bool {
    debug_assert_ne!(j, k, "gate_greater is defined for distinct gates");
    if (rho_j - rho_k).abs() <= TIE_SNAP {
        j > k
    } else {
        rho_j > rho_k
    }
}

/// The three-step selection rule on a normalized closeness vector: disregard
/// zero-closeness gates, deposit c_j on every gate, pick the maximum under
/// [`gate_greater`] on the post-deposit energies and charge it one unit.
/// Returns the chosen gate and the disregarded set.
///
/// `closeness` must sum to 1, which guarantees at least one open gate.
pub(crate) fn apply_selection(ledger: &mut EnergyLedger, closeness: &[f64]) -> (usize, Vec<usize>) {
    debug_assert_eq!(ledger.gate_count(), closeness.len());
    let disregarded: Vec<usize> = closeness
        .iter()
        .enumerate()
        .filter(|(_, &c)| c <= ZERO_CLOSENESS)
        .map(|(j, _)| j)
        .collect();
    for (j, &c) in closeness.iter().enumerate() {
        ledger.add(j, c);
    }
    let mut best: Option<usize> = None;
    for (j, &c) in closeness.iter().enumerate() {
        if c <= ZERO_CLOSENESS {
            continue;
        }
        best = match best {
            None => Some(j),
            Some(b) => {
                if gate_greater(j, ledger.energy(j), b, ledger.energy(b)) {
                    Some(j)
                } else {
                    Some(b)
                }
            }
        };
    }
    let chosen = best.expect("normalized closeness must leave at least one gate open");
    ledger.add(chosen, -1.0);
    (chosen, disregarded)
}

/// One full measurement of ξ: normalize, run the selection rule, collapse.
pub fn measure(
    app: &Apparatus,
    ledger: &mut EnergyLedger,
    xi: &StateVector,
) -> Result<MeasurementOutcome> {
    if ledger.gate_count() != app.n {
        return Err(Error::DimensionMismatch(format!(
            "ledger has {} gates, apparatus has {}",
            ledger.gate_count(),
            app.n
        )));
    }
    let (_, c) = normalize_for_measurement(app, xi)?;
    let ledger_before = ledger.energies().to_vec();
    let (chosen, disregarded) = apply_selection(ledger, &c);
    ledger.bump_history();
    Ok(MeasurementOutcome {
        collapsed_state: StateVector::basis(app.n, chosen),
        closeness: c,
        chosen,
        ledger_before,
        ledger_after: ledger.energies().to_vec(),
        disregarded,
    })
}

/// The branch operator Û_j(t) = Û(t)·Û(1)⁻¹·P_j·Û(1), with Û(1)⁻¹ taken as
/// the conjugate transpose.
pub fn u_hat_j(app: &Apparatus, j: usize, t: f64) -> Result<ComplexMatrix> {
    if j >= app.n {
        return Err(Error::IndexOutOfRange {
            index: j,
            count: app.n,
        });
    }
    let p = gate_projector(j, app.n, app.m)?;
    let u_t = app.propagator(t);
    Ok(u_t.matmul(&app.u1.adjoint()).matmul(&p).matmul(&app.u1))
}

/// The system-side branch evolution U_j(t)ξ = Tr_W(Û_j(t))·ξ.
pub fn u_j_trace(app: &Apparatus, j: usize, t: f64, xi: &StateVector) -> Result<StateVector> {
    if xi.dim() != app.n {
        return Err(Error::DimensionMismatch(format!(
            "state has dim {}, apparatus system dim is {}",
            xi.dim(),
            app.n
        )));
    }
    let op = partial_trace_w(&u_hat_j(app, j, t)?, app.n, app.m)?;
    Ok(xi.apply(&op))
}

/// Per-gate residual of the decoupling condition
/// `Tr_W(Ĥ·P_j·Û(1)) = H_system·M_j`, in the max-entry norm. The apparatus
/// is independence-compatible when every residual is below
/// [`INDEPENDENCE_TOL`].
pub fn independence_residual(app: &Apparatus, h_system: &ComplexMatrix) -> Result<Vec<f64>> {
    if h_system.rows() != app.n || h_system.cols() != app.n {
        return Err(Error::DimensionMismatch(format!(
            "system Hamiltonian must be {n}x{n}, got {}x{}",
            h_system.rows(),
            h_system.cols(),
            n = app.n,
        )));
    }
    let mut out = Vec::with_capacity(app.n);
    for j in 0..app.n {
        let p = gate_projector(j, app.n, app.m)?;
        let lhs = partial_trace_w(&app.hhat.matmul(&p).matmul(&app.u1), app.n, app.m)?;
        let rhs = h_system.matmul(&app.gate_ops[j]);
        out.push(lhs.max_abs_diff(&rhs));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qla::{evolution_operator, partial_inner_left};

    fn c64(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sqrt_state(weights: &[f64]) -> StateVector {
        StateVector::from_reals(&weights.iter().map(|w| w.sqrt()).collect::<Vec<_>>())
    }

    #[test]
    fn trivial_apparatus_gate_ops() {
        let app = Apparatus::trivial(2, 2, 1.0);
        for j in 0..2 {
            let mut expected = ComplexMatrix::zeros(2, 2);
            expected[(j, j)] = c64(2.0, 0.0);
            assert!(app.gate_ops()[j].max_abs_diff(&expected) < 1e-12);
        }
    }

    #[test]
    fn ideal_apparatus_gate_ops_carry_phases() {
        let levels = [0.4, -1.1, 2.3];
        let m = 2;
        let app = Apparatus::ideal(&levels, m, 1.0);
        for (j, &lam) in levels.iter().enumerate() {
            let mut expected = ComplexMatrix::zeros(3, 3);
            expected[(j, j)] = c64(m as f64, 0.0) * (-C64::i() * lam).exp();
            assert!(
                app.gate_ops()[j].max_abs_diff(&expected) < 1e-12,
                "gate {j}"
            );
        }
    }

    #[test]
    fn gate_ops_sum_to_traced_propagator() {
        let app = Apparatus::random(3, 2, 1.0, 7);
        let mut sum = ComplexMatrix::zeros(3, 3);
        for op in app.gate_ops() {
            sum = sum.add(op);
        }
        let traced = partial_trace_w(app.u1(), 3, 2).unwrap();
        assert!(sum.max_abs_diff(&traced) < 1e-9);
    }

    #[test]
    fn gate_ops_have_single_nonzero_row() {
        // P_j zeroes every row a != j exactly, so M_j keeps that structure
        // bit-for-bit and the rank-1 property is structural, not approximate.
        let app = Apparatus::random(4, 3, 1.0, 21);
        for (j, m_j) in app.gate_ops().iter().enumerate() {
            for r in 0..4 {
                if r == j {
                    continue;
                }
                for col in 0..4 {
                    assert_eq!(m_j[(r, col)], c64(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn closeness_of_eigenstate_is_certain() {
        let app = Apparatus::ideal(&[1.0, 2.0], 2, 1.0);
        let c = closeness(&app, &StateVector::basis(2, 0)).unwrap();
        assert!((c[0] - 4.0).abs() < 1e-12);
        // The orthogonal projection vanishes exactly: gate operators keep
        // structural zeros, so no roundoff leaks in.
        assert_eq!(c[1], 0.0);
    }

    #[test]
    fn closeness_of_balanced_superposition() {
        let app = Apparatus::ideal(&[1.0, 2.0], 2, 1.0);
        let xi = sqrt_state(&[0.5, 0.5]);
        let c = closeness(&app, &xi).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-12);
        assert!((c[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_produces_unit_sum() {
        let app = Apparatus::ideal(&[1.0, 2.0], 2, 1.0);
        let xi = sqrt_state(&[0.7, 0.3]);
        let (scaled, c) = normalize_for_measurement(&app, &xi).unwrap();
        assert!((neumaier_sum(&c) - 1.0).abs() < 1e-12);
        assert!((c[0] - 0.7).abs() < 1e-12);
        assert!((c[1] - 0.3).abs() < 1e-12);
        // Re-normalizing the scaled state is the identity.
        let (rescaled, _) = normalize_for_measurement(&app, &scaled).unwrap();
        assert!(rescaled.max_abs_diff(&scaled) < 1e-12);
    }

    #[test]
    fn normalize_rejects_invisible_state() {
        let app = Apparatus::trivial(2, 2, 1.0);
        let xi = StateVector::new(vec![c64(0.0, 0.0), c64(0.0, 0.0)]);
        match normalize_for_measurement(&app, &xi) {
            Err(Error::AllGatesClosed { .. }) => {}
            other => panic!("expected AllGatesClosed, got {other:?}"),
        }
    }

    #[test]
    fn gate_greater_ordering() {
        assert!(gate_greater(0, 0.7, 1, 0.3));
        // Equal energies: the higher index wins, so gate 0 is not greater.
        assert!(!gate_greater(0, 0.5, 1, 0.5));
        assert!(gate_greater(1, 0.5, 0, 0.5));
        // Snap: a sub-1e-12 difference still ties.
        assert!(gate_greater(1, 0.5 - 1e-13, 0, 0.5));
    }

    #[test]
    fn gate_greater_is_antisymmetric() {
        let cases = [(0.7, 0.3), (0.5, 0.5), (0.5, 0.5 + 5e-13), (-1.0, 2.0)];
        for (a, b) in cases {
            assert!(gate_greater(0, a, 1, b) ^ gate_greater(1, b, 0, a));
        }
    }

    #[test]
    fn measure_majority_weight_wins_first() {
        let app = Apparatus::ideal(&[1.0, 2.0], 2, 1.0);
        let mut ledger = EnergyLedger::zeros(2);
        let out = measure(&app, &mut ledger, &sqrt_state(&[0.7, 0.3])).unwrap();
        assert_eq!(out.chosen, 0);
        assert!((ledger.energy(0) + 0.3).abs() < 1e-12);
        assert!((ledger.energy(1) - 0.3).abs() < 1e-12);
        assert_eq!(out.collapsed_state, StateVector::basis(2, 0));
        assert_eq!(ledger.history_len(), 1);
    }

    #[test]
    fn measure_tie_goes_to_higher_index() {
        let app = Apparatus::ideal(&[1.0, 2.0], 2, 1.0);
        let mut ledger = EnergyLedger::zeros(2);
        let out = measure(&app, &mut ledger, &sqrt_state(&[0.5, 0.5])).unwrap();
        assert_eq!(out.chosen, 1);
        assert!((ledger.energy(0) - 0.5).abs() < 1e-12);
        assert!((ledger.energy(1) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn measure_skips_disregarded_gates() {
        let app = Apparatus::ideal(&[1.0, 2.0, 3.0], 3, 1.0);
        let mut ledger = EnergyLedger::new(vec![100.0, 0.0, 0.0]);
        let xi = sqrt_state(&[0.0, 0.4, 0.6]);
        let out = measure(&app, &mut ledger, &xi).unwrap();
        assert_eq!(out.disregarded, vec![0]);
        assert_eq!(out.chosen, 2);
        // The disregarded gate receives exactly zero energy.
        assert_eq!(ledger.energy(0), 100.0);
        assert!((ledger.energy(1) - 0.4).abs() < 1e-12);
        assert!((ledger.energy(2) + 0.4).abs() < 1e-12);
    }

    #[test]
    fn measure_conserves_ledger_total() {
        let app = Apparatus::random(3, 2, 1.0, 5);
        let mut ledger = EnergyLedger::new(vec![0.25, -1.5, 2.0]);
        let xi = StateVector::new(vec![c64(0.3, 0.4), c64(-0.2, 0.6), c64(0.1, 0.0)]);
        for step in 0..100 {
            measure(&app, &mut ledger, &xi).unwrap();
            assert!(
                ledger.conservation_defect() <= 1e-9 * (step as f64 + 2.0),
                "step {step}"
            );
        }
    }

    #[test]
    fn measure_is_scale_invariant_in_the_state() {
        let app = Apparatus::random(3, 3, 1.0, 9);
        let xi = StateVector::new(vec![c64(0.2, -0.1), c64(0.5, 0.3), c64(-0.4, 0.2)]);
        let scaled = xi.scale(c64(0.0, -3.7));
        let mut l1 = EnergyLedger::new(vec![0.1, 0.0, -0.2]);
        let mut l2 = l1.clone();
        let a = measure(&app, &mut l1, &xi).unwrap();
        let b = measure(&app, &mut l2, &scaled).unwrap();
        assert_eq!(a.chosen, b.chosen);
        // Normalization removes the scale but rounds differently, so the
        // ledgers agree only to roundoff.
        for (x, y) in l1.energies().iter().zip(l2.energies()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn measure_is_bitwise_deterministic() {
        let app = Apparatus::random(4, 2, 1.0, 33);
        let xi = StateVector::new(vec![
            c64(0.4, 0.1),
            c64(-0.3, 0.2),
            c64(0.0, 0.7),
            c64(0.2, -0.2),
        ]);
        let mut l1 = EnergyLedger::new(vec![0.3, -0.1, 0.0, 0.05]);
        let mut l2 = l1.clone();
        let a = measure(&app, &mut l1, &xi).unwrap();
        let b = measure(&app, &mut l2, &xi).unwrap();
        assert_eq!(a.chosen, b.chosen);
        assert_eq!(a.closeness, b.closeness);
        assert_eq!(l1, l2);
    }

    #[test]
    fn u_hat_at_time_one_is_projected_propagator() {
        let app = Apparatus::random(3, 2, 1.0, 11);
        for j in 0..3 {
            let op = u_hat_j(&app, j, 1.0).unwrap();
            let expected = gate_projector(j, 3, 2).unwrap().matmul(app.u1());
            assert!(op.max_abs_diff(&expected) < 1e-12);
        }
    }

    #[test]
    fn u_hat_sums_to_propagator() {
        let app = Apparatus::random(3, 2, 1.0, 11);
        for t in [0.0, 0.37, 1.0] {
            let mut sum = ComplexMatrix::zeros(6, 6);
            for j in 0..3 {
                sum = sum.add(&u_hat_j(&app, j, t).unwrap());
            }
            assert!(sum.max_abs_diff(&app.propagator(t)) < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn u_hat_with_zero_hamiltonian_is_the_projector() {
        let app = Apparatus::trivial(2, 3, 1.0);
        for j in 0..2 {
            for t in [0.0, 0.41, 1.0] {
                let op = u_hat_j(&app, j, t).unwrap();
                let p = gate_projector(j, 2, 3).unwrap();
                assert!(op.max_abs_diff(&p) < 1e-12);
            }
        }
    }

    #[test]
    fn u_trace_at_time_one_matches_closeness() {
        let app = Apparatus::random(3, 2, 1.0, 23);
        let xi = StateVector::new(vec![c64(0.5, 0.0), c64(0.1, -0.6), c64(-0.2, 0.3)]);
        let c = closeness(&app, &xi).unwrap();
        for (j, &c_j) in c.iter().enumerate() {
            let branch = u_j_trace(&app, j, 1.0, &xi).unwrap();
            assert!((branch.norm_sqr() - c_j).abs() < 1e-10, "gate {j}");
        }
    }

    #[test]
    fn u_trace_with_zero_hamiltonian() {
        let app = Apparatus::trivial(2, 3, 1.0);
        let xi = StateVector::new(vec![c64(0.6, 0.2), c64(-0.1, 0.7)]);
        for j in 0..2 {
            for t in [0.0, 0.8] {
                let got = u_j_trace(&app, j, t, &xi).unwrap();
                let expected =
                    StateVector::basis(2, j).scale(StateVector::basis(2, j).inner(&xi) * 3.0);
                assert!(got.max_abs_diff(&expected) < 1e-12);
            }
        }
    }

    #[test]
    fn u_trace_satisfies_schrodinger_by_central_difference() {
        let hbar = 1.0;
        let app = Apparatus::random(3, 2, hbar, 17);
        let xi = StateVector::new(vec![c64(0.5, 0.1), c64(0.2, -0.4), c64(-0.3, 0.3)]);
        let h = 1e-4;
        let t = 0.6;
        let scale = app.hamiltonian().max_abs().powi(2).max(1.0);
        for j in 0..3 {
            let plus = u_j_trace(&app, j, t + h, &xi).unwrap();
            let minus = u_j_trace(&app, j, t - h, &xi).unwrap();
            let lhs = plus.sub(&minus).scale(c64(0.0, hbar / (2.0 * h)));
            let rhs_op = partial_trace_w(
                &app.hamiltonian().matmul(&u_hat_j(&app, j, t).unwrap()),
                3,
                2,
            )
            .unwrap();
            let rhs = xi.apply(&rhs_op);
            assert!(lhs.max_abs_diff(&rhs) < 1e-6 * scale, "gate {j}");
        }
    }

    #[test]
    fn independence_holds_for_ideal_mode() {
        let levels = [0.7, -0.2, 1.4];
        let app = Apparatus::ideal(&levels, 2, 1.0);
        let h_sys = ComplexMatrix::from_real_diagonal(&levels);
        let r = independence_residual(&app, &h_sys).unwrap();
        assert!(r.iter().all(|&x| x < INDEPENDENCE_TOL), "{r:?}");
    }

    #[test]
    fn independence_zero_hamiltonian_is_exact() {
        let app = Apparatus::trivial(2, 2, 1.0);
        let r = independence_residual(&app, &ComplexMatrix::zeros(2, 2)).unwrap();
        assert_eq!(r, vec![0.0, 0.0]);
    }

    #[test]
    fn independence_fails_for_coupled_hamiltonian() {
        let app = Apparatus::random(3, 2, 1.0, 7);
        let h_sys = partial_trace_w(app.hamiltonian(), 3, 2)
            .unwrap()
            .scale(c64(0.5, 0.0));
        let r = independence_residual(&app, &h_sys).unwrap();
        assert!(r.iter().cloned().fold(0.0, f64::max) > 1e-6);
    }

    #[test]
    fn u1_matches_standalone_evolution_operator() {
        let hhat = random_hermitian(6, 3);
        let app = build_apparatus(hhat.clone(), 3, 2, 1.0).unwrap();
        let u = evolution_operator(&hhat, 1.0, 1.0).unwrap();
        assert_eq!(app.u1().entries(), u.entries());
    }

    #[test]
    fn partner_contraction_of_collapsed_state() {
        // Sanity link between collapse output and the entanglement kernel.
        let app = Apparatus::trivial(2, 2, 1.0);
        let mut ledger = EnergyLedger::zeros(2);
        let out = measure(&app, &mut ledger, &sqrt_state(&[1.0, 0.0])).unwrap();
        let u = StateVector::new(vec![c64(0.8, 0.0), c64(0.0, 0.6)]);
        let pair = out.collapsed_state.tensor(&u);
        let partner = partial_inner_left(&out.collapsed_state, &pair).unwrap();
        assert!(partner.max_abs_diff(&u) < 1e-15);
    }
}
