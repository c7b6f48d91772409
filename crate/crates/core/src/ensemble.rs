//! Repeated-measurement statistics and the model's convergence claims.
//!
//! The central fact: when the same state is measured n times on one ledger,
//! the gate energies satisfy `B < n·c_j − n_j < C − (N−1)·B` at every prefix,
//! with `B = −(|C| + 4)`. Outcome frequencies therefore converge to the
//! closeness vector at rate O(1/n), strictly faster than i.i.d. sampling's
//! O(1/√n). [`run_with_closeness`] checks the inequality chain after every
//! step and treats a violation as an implementation bug.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gates::{
    apply_selection, neumaier_sum, normalize_closeness, Apparatus, EnergyLedger,
    MeasurementOutcome, TIE_SNAP,
};
use crate::qla::{
    partial_inner_left, partial_trace_w, tensor_product, ComplexMatrix, StateVector, HERMITIAN_TOL,
};

/// Max-entry tolerance for accepting a projector family as a partition.
pub const PARTITION_TOL: f64 = 1e-10;

/// Counts over a repeated-identical-state run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStatistics {
    /// Total measurements performed.
    pub n: u64,
    /// Times each gate was chosen.
    pub counts: Vec<u64>,
    /// The fixed normalized closeness vector of the repeated state.
    pub closeness_ref: Vec<f64>,
    /// Largest |n′·c_j − n_j| observed over all prefixes n′ (count units).
    pub max_deviation: f64,
    /// Lower energy bound B = −(|C| + 4).
    pub bound_b: f64,
    /// Upper energy bound C − (N−1)·B.
    pub bound_upper: f64,
    /// Prefix bound violations; always 0 on a conforming run.
    pub violations: u64,
}

/// Per-step record handed to a run observer.
#[derive(Debug)]
pub struct StepRecord<'a> {
    /// 1-based step number within the run.
    pub step: u64,
    /// Chosen gate, 0-based.
    pub chosen: usize,
    /// The fixed normalized closeness vector.
    pub closeness: &'a [f64],
    /// Gate energies after this step.
    pub energies: &'a [f64],
    /// max_j |step·c_j − n_j| at this prefix.
    pub deviation: f64,
}

/// Repeats the selection rule n times with a fixed normalized closeness
/// vector, asserting the per-step bound `B < n′·c_j − n_j < C − (N−1)·B`
/// with `B = −(|C| + 4)`.
///
/// `closeness` must sum to 1 (the caller normalizes). The observer sees
/// every step; pass `|_| {}` when records are not needed.
pub fn run_with_closeness(
    closeness: &[f64],
    ledger: &mut EnergyLedger,
    n: u64,
    mut observer: impl FnMut(&StepRecord),
) -> Result<RunStatistics> {
    assert_eq!(
        ledger.gate_count(),
        closeness.len(),
        "ledger and closeness must agree on the gate count"
    );
    assert!(
        (neumaier_sum(closeness) - 1.0).abs() < 1e-9,
        "closeness must be normalized to unit sum"
    );
    let gates = closeness.len();
    let total = ledger.total();
    let bound_b = -(total.abs() + 4.0);
    let bound_upper = total - (gates as f64 - 1.0) * bound_b;
    let mut counts = vec![0u64; gates];
    let mut max_deviation = 0.0f64;
    for step in 1..=n {
        let (chosen, _) = apply_selection(ledger, closeness);
        ledger.bump_history();
        counts[chosen] += 1;
        let mut dev = 0.0f64;
        for (j, &c_j) in closeness.iter().enumerate() {
            let value = step as f64 * c_j - counts[j] as f64;
            if value <= bound_b || value >= bound_upper {
                return Err(Error::BoundViolation {
                    step,
                    gate: j,
                    value,
                    lower: bound_b,
                    upper: bound_upper,
                });
            }
            dev = dev.max(value.abs());
        }
        max_deviation = max_deviation.max(dev);
        observer(&StepRecord {
            step,
            chosen,
            closeness,
            energies: ledger.energies(),
            deviation: dev,
        });
    }
    Ok(RunStatistics {
        n,
        counts,
        closeness_ref: closeness.to_vec(),
        max_deviation,
        bound_b,
        bound_upper,
        violations: 0,
    })
}

/// Measures the same state n times on one ledger and collects statistics.
pub fn run_repeated(
    app: &Apparatus,
    ledger: &mut EnergyLedger,
    xi: &StateVector,
    n: u64,
) -> Result<RunStatistics> {
    run_repeated_with(app, ledger, xi, n, |_| {})
}

/// [`run_repeated`] with a per-step observer.
pub fn run_repeated_with(
    app: &Apparatus,
    ledger: &mut EnergyLedger,
    xi: &StateVector,
    n: u64,
    observer: impl FnMut(&StepRecord),
) -> Result<RunStatistics> {
    let (_, c) = crate::gates::normalize_for_measurement(app, xi)?;
    run_with_closeness(&c, ledger, n, observer)
}

/// True when the final frequencies sit inside the deterministic envelope:
/// max_j |n_j/n − c_j| ≤ max(|B|, C−(N−1)B)/n + tol.
pub fn born_limit_check(stats: &RunStatistics, tol: f64) -> bool {
    if stats.n == 0 {
        return true;
    }
    let n = stats.n as f64;
    let envelope = stats.bound_b.abs().max(stats.bound_upper) / n + tol;
    stats
        .counts
        .iter()
        .zip(&stats.closeness_ref)
        .map(|(&n_j, &c_j)| (n_j as f64 / n - c_j).abs())
        .fold(0.0, f64::max)
        <= envelope
}

/// Samples n outcomes i.i.d. from the closeness vector with a ChaCha8
/// generator; the stochastic baseline the deterministic rule is compared
/// against. Only the counts are meaningful; the bound fields are zero.
pub fn iid_reference(closeness: &[f64], n: u64, seed: u64) -> RunStatistics {
    assert!(
        (neumaier_sum(closeness) - 1.0).abs() < 1e-9,
        "closeness must be normalized to unit sum"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; closeness.len()];
    for _ in 0..n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = closeness.len() - 1;
        for (j, &c_j) in closeness.iter().enumerate() {
            acc += c_j;
            if u < acc {
                pick = j;
                break;
            }
        }
        counts[pick] += 1;
    }
    let max_deviation = counts
        .iter()
        .zip(closeness)
        .map(|(&n_j, &c_j)| (n as f64 * c_j - n_j as f64).abs())
        .fold(0.0, f64::max);
    RunStatistics {
        n,
        counts,
        closeness_ref: closeness.to_vec(),
        max_deviation,
        bound_b: 0.0,
        bound_upper: 0.0,
        violations: 0,
    }
}

/// Apparatus extended to measure one side of an entangled pair in V₁⊗V₂.
///
/// The gates become v_j⊗V₂⊗W; their trace operators on V₁⊗V₂ reduce to
/// `M_j ⊗ I_{dim2}` under the system-major index convention, which is what
/// is stored here. Gate energies are whatever ledger the caller passes —
/// the same ledger as the unentangled apparatus.
#[derive(Debug, Clone)]
pub struct EntangledApparatus {
    base: Apparatus,
    dim2: usize,
    ext_gate_ops: Vec<ComplexMatrix>,
}

impl EntangledApparatus {
    pub fn new(base: Apparatus, dim2: usize) -> Self {
        assert!(dim2 >= 1);
        let eye2 = ComplexMatrix::identity(dim2);
        let ext_gate_ops = base
            .gate_ops()
            .iter()
            .map(|m_j| tensor_product(m_j, &eye2))
            .collect();
        Self {
            base,
            dim2,
            ext_gate_ops,
        }
    }

    pub fn base(&self) -> &Apparatus {
        &self.base
    }

    pub fn dim2(&self) -> usize {
        self.dim2
    }

    /// dim(V₁⊗V₂) = N·dim2.
    pub fn pair_dim(&self) -> usize {
        self.base.system_dim() * self.dim2
    }

    pub fn ext_gate_ops(&self) -> &[ComplexMatrix] {
        &self.ext_gate_ops
    }

    /// Extended closeness c_j = ‖(M_j ⊗ I)·ξ‖², no normalization.
    pub fn closeness(&self, xi: &StateVector) -> Result<Vec<f64>> {
        if xi.dim() != self.pair_dim() {
            return Err(Error::DimensionMismatch(format!(
                "entangled state has dim {}, expected N·dim2 = {}",
                xi.dim(),
                self.pair_dim()
            )));
        }
        Ok(self
            .ext_gate_ops
            .iter()
            .map(|op| xi.apply(op).norm_sqr())
            .collect())
    }
}

/// Measures the V₁ side of an entangled pair. The ledger update is identical
/// to the unentangled rule; the second return value is the partner state
/// ⟨v_{j₀}, ξ⟩ in V₂, unnormalized.
pub fn measure_entangled(
    eapp: &EntangledApparatus,
    ledger: &mut EnergyLedger,
    xi: &StateVector,
) -> Result<(MeasurementOutcome, StateVector)> {
    let n = eapp.base.system_dim();
    if ledger.gate_count() != n {
        return Err(Error::DimensionMismatch(format!(
            "ledger has {} gates, apparatus has {}",
            ledger.gate_count(),
            n
        )));
    }
    let raw = eapp.closeness(xi)?;
    let (_, c) = normalize_closeness(xi, raw)?;
    let ledger_before = ledger.energies().to_vec();
    let (chosen, disregarded) = apply_selection(ledger, &c);
    ledger.bump_history();
    let collapsed_state = StateVector::basis(n, chosen);
    let partner = partial_inner_left(&collapsed_state, xi)?;
    Ok((
        MeasurementOutcome {
            closeness: c,
            chosen,
            collapsed_state,
            ledger_before,
            ledger_after: ledger.energies().to_vec(),
            disregarded,
        },
        partner,
    ))
}

/// Repeats the entangled measurement of the same pair state on one shared
/// ledger, with the same per-step bound checks as [`run_with_closeness`].
pub fn run_entangled_repeated(
    eapp: &EntangledApparatus,
    ledger: &mut EnergyLedger,
    xi: &StateVector,
    n: u64,
    observer: impl FnMut(&StepRecord),
) -> Result<RunStatistics> {
    let raw = eapp.closeness(xi)?;
    let (_, c) = normalize_closeness(xi, raw)?;
    run_with_closeness(&c, ledger, n, observer)
}

/// Apparatus whose gates are pairwise orthogonal subspaces V₁,…,V_l of V
/// instead of single basis vectors.
#[derive(Debug, Clone)]
pub struct SubspaceApparatus {
    n: usize,
    m: usize,
    hbar: f64,
    projectors: Vec<ComplexMatrix>,
    hhat: ComplexMatrix,
    u1: ComplexMatrix,
    gate_ops: Vec<ComplexMatrix>,
}

/// Builds the subspace apparatus. The projectors must be orthogonal
/// projectors on V, pairwise orthogonal, summing to the identity; the gate
/// operator for subspace k is `Tr_W((P_k ⊗ I_m)·Û(1))`.
pub fn build_subspace_apparatus(
    projectors: Vec<ComplexMatrix>,
    hhat: ComplexMatrix,
    m: usize,
    hbar: f64,
) -> Result<SubspaceApparatus> {
    assert!(hbar > 0.0, "hbar must be positive");
    if projectors.is_empty() {
        return Err(Error::NotAPartition("no projectors given".into()));
    }
    let n = projectors[0].rows();
    for (k, p) in projectors.iter().enumerate() {
        if p.rows() != n || p.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "projector {k} is {}x{}, expected {n}x{n}",
                p.rows(),
                p.cols()
            )));
        }
        if p.hermitian_defect() > PARTITION_TOL || p.matmul(p).max_abs_diff(p) > PARTITION_TOL {
            return Err(Error::NotAPartition(format!(
                "entry {k} is not an orthogonal projector"
            )));
        }
    }
    for a in 0..projectors.len() {
        for b in (a + 1)..projectors.len() {
            let cross = projectors[a].matmul(&projectors[b]).max_abs();
            if cross > PARTITION_TOL {
                return Err(Error::NotAPartition(format!(
                    "projectors {a} and {b} overlap: max |P_a P_b| = {cross:.3e}"
                )));
            }
        }
    }
    let mut sum = ComplexMatrix::zeros(n, n);
    for p in &projectors {
        sum = sum.add(p);
    }
    let defect = sum.max_abs_diff(&ComplexMatrix::identity(n));
    if defect > PARTITION_TOL {
        return Err(Error::NotAPartition(format!(
            "projectors do not sum to the identity: defect {defect:.3e}"
        )));
    }
    if hhat.rows() != n * m || hhat.cols() != n * m {
        return Err(Error::DimensionMismatch(format!(
            "combined Hamiltonian must be {d}x{d} for N={n}, m={m}; got {}x{}",
            hhat.rows(),
            hhat.cols(),
            d = n * m,
        )));
    }
    let h_defect = hhat.hermitian_defect();
    if h_defect > HERMITIAN_TOL {
        return Err(Error::NonHermitianInput {
            defect: h_defect,
            tol: HERMITIAN_TOL,
        });
    }
    let (vals, vecs) = hhat.hermitian_eigen();
    let u1 = crate::qla::propagator_from_eigen(&vals, &vecs, 1.0, hbar);
    let eye_m = ComplexMatrix::identity(m);
    let gate_ops = projectors
        .iter()
        .map(|p| partial_trace_w(&tensor_product(p, &eye_m).matmul(&u1), n, m))
        .collect::<Result<Vec<_>>>()?;
    Ok(SubspaceApparatus {
        n,
        m,
        hbar,
        projectors,
        hhat,
        u1,
        gate_ops,
    })
}

impl SubspaceApparatus {
    pub fn system_dim(&self) -> usize {
        self.n
    }

    pub fn apparatus_dim(&self) -> usize {
        self.m
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn subspace_count(&self) -> usize {
        self.projectors.len()
    }

    pub fn projectors(&self) -> &[ComplexMatrix] {
        &self.projectors
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hhat
    }

    pub fn u1(&self) -> &ComplexMatrix {
        &self.u1
    }

    pub fn gate_ops(&self) -> &[ComplexMatrix] {
        &self.gate_ops
    }

    /// Closeness of ξ to every subspace gate: c_k = ‖G_k ξ‖².
    pub fn closeness(&self, xi: &StateVector) -> Result<Vec<f64>> {
        if xi.dim() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "state has dim {}, apparatus system dim is {}",
                xi.dim(),
                self.n
            )));
        }
        Ok(self
            .gate_ops
            .iter()
            .map(|g| xi.apply(g).norm_sqr())
            .collect())
    }
}

/// Measures ξ against the subspace gates. The selection rule is the one from
/// [`crate::gates::measure`] with l gates; the collapsed state is the
/// normalized P_{V_k}-projection of ξ.
pub fn measure_subspace(
    sapp: &SubspaceApparatus,
    ledger: &mut EnergyLedger,
    xi: &StateVector,
) -> Result<MeasurementOutcome> {
    if ledger.gate_count() != sapp.subspace_count() {
        return Err(Error::DimensionMismatch(format!(
            "ledger has {} gates, apparatus has {} subspaces",
            ledger.gate_count(),
            sapp.subspace_count()
        )));
    }
    let raw = sapp.closeness(xi)?;
    let (_, c) = normalize_closeness(xi, raw)?;
    let ledger_before = ledger.energies().to_vec();
    let (chosen, disregarded) = apply_selection(ledger, &c);
    ledger.bump_history();
    let projected = xi.apply(&sapp.projectors[chosen]);
    let norm = projected.norm();
    let collapsed_state = if norm > 0.0 {
        projected.scale(crate::qla::C64::new(1.0 / norm, 0.0))
    } else {
        projected
    };
    Ok(MeasurementOutcome {
        closeness: c,
        chosen,
        collapsed_state,
        ledger_before,
        ledger_after: ledger.energies().to_vec(),
        disregarded,
    })
}

/// Repeats the subspace measurement of the same state on one ledger, with
/// the standard per-step bound checks.
pub fn run_subspace_repeated(
    sapp: &SubspaceApparatus,
    ledger: &mut EnergyLedger,
    xi: &StateVector,
    n: u64,
    observer: impl FnMut(&StepRecord),
) -> Result<RunStatistics> {
    let raw = sapp.closeness(xi)?;
    let (_, c) = normalize_closeness(xi, raw)?;
    run_with_closeness(&c, ledger, n, observer)
}

/// Returns a copy of the ledger with seeded zero-sum Gaussian noise of the
/// given magnitude added to the gate energies. The conserved total and the
/// measurement history are untouched.
pub fn perturb_energies(ledger: &EnergyLedger, magnitude: f64, seed: u64) -> EnergyLedger {
    assert!(magnitude >= 0.0);
    let mut out = ledger.clone();
    if magnitude == 0.0 {
        return out;
    }
    let n = ledger.gate_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..n)
        .map(|_| magnitude * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mean = neumaier_sum(&noise) / n as f64;
    for (j, &g) in noise.iter().enumerate() {
        out.add(j, g - mean);
    }
    out
}

/// One colliding pair found by [`generic_init_check`]: the reachable energy
/// `rho0[j] + m_j + n_j·c_j` equals `rho0[k] + m_k + n_k·c_k` within the tie
/// snap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Collision {
    pub j: usize,
    pub k: usize,
    pub m_j: i64,
    pub n_j: i64,
    pub m_k: i64,
    pub n_k: i64,
}

/// Exhaustively searches integers |m|, |n| ≤ k_bound for colliding reachable
/// energies between every pair of gates. An empty result certifies that no
/// tie can occur within that horizon, so the index rule never fires.
pub fn generic_init_check(rho0: &[f64], closeness: &[f64], k_bound: i64) -> Vec<Collision> {
    assert_eq!(rho0.len(), closeness.len());
    assert!(k_bound >= 1);
    let mut collisions = Vec::new();
    let range = -k_bound..=k_bound;
    for j in 0..rho0.len() {
        for k in (j + 1)..rho0.len() {
            for m_j in range.clone() {
                for n_j in range.clone() {
                    let lhs = rho0[j] + m_j as f64 + n_j as f64 * closeness[j];
                    for m_k in range.clone() {
                        for n_k in range.clone() {
                            let rhs = rho0[k] + m_k as f64 + n_k as f64 * closeness[k];
                            if (lhs - rhs).abs() <= TIE_SNAP {
                                collisions.push(Collision {
                                    j,
                                    k,
                                    m_j,
                                    n_j,
                                    m_k,
                                    n_k,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    collisions
}
