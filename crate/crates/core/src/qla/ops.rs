use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::matrix::{ComplexMatrix, C64};
use super::vector::StateVector;
use super::HERMITIAN_TOL;
use crate::error::{Error, Result};

/// Kronecker product. Index convention: (a-row, b-row) → a_row·rows(b) + b_row,
/// and the same for columns.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ar, ac, br, bc) = (a.rows(), a.cols(), b.rows(), b.cols());
    let mut out = ComplexMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = s * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Propagator e^{−iĤt/ħ} for a Hermitian generator, computed from its
/// eigendecomposition Ĥ = QΛQ†.
pub fn evolution_operator(hhat: &ComplexMatrix, t: f64, hbar: f64) -> Result<ComplexMatrix> {
    if !hhat.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "generator must be square, got {}x{}",
            hhat.rows(),
            hhat.cols()
        )));
    }
    let defect = hhat.hermitian_defect();
    if defect > HERMITIAN_TOL {
        return Err(Error::NonHermitianInput {
            defect,
            tol: HERMITIAN_TOL,
        });
    }
    let (vals, vecs) = hhat.hermitian_eigen();
    Ok(propagator_from_eigen(&vals, &vecs, t, hbar))
}

/// Q · diag(e^{−iλ_k t/ħ}) · Q† from a precomputed Hermitian eigendecomposition.
pub(crate) fn propagator_from_eigen(
    vals: &[f64],
    vecs: &ComplexMatrix,
    t: f64,
    hbar: f64,
) -> ComplexMatrix {
    let n = vals.len();
    let phases: Vec<C64> = vals
        .iter()
        .map(|&l| (-C64::i() * l * t / hbar).exp())
        .collect();
    ComplexMatrix::from_fn(n, n, |r, c| {
        (0..n)
            .map(|k| vecs[(r, k)] * phases[k] * vecs[(c, k)].conj())
            .sum()
    })
}

/// Projector onto v_j⊗W in the combined space: |v_j⟩⟨v_j| ⊗ I_m under the
/// system-major index convention. Gate indices are 0-based.
pub fn gate_projector(j: usize, n: usize, m: usize) -> Result<ComplexMatrix> {
    if j >= n {
        return Err(Error::IndexOutOfRange { index: j, count: n });
    }
    let mut p = ComplexMatrix::zeros(n * m, n * m);
    for i in 0..m {
        p[(j * m + i, j * m + i)] = C64::new(1.0, 0.0);
    }
    Ok(p)
}

/// Partial trace over the apparatus factor W:
/// (Tr_W A)_{ab} = Σ_i A_{(a,i),(b,i)} with combined index (a,i) = a·m + i.
pub fn partial_trace_w(a: &ComplexMatrix, n: usize, m: usize) -> Result<ComplexMatrix> {
    if a.rows() != n * m || a.cols() != n * m {
        return Err(Error::DimensionMismatch(format!(
            "partial trace expects a {d}x{d} operator (N={n}, m={m}), got {}x{}",
            a.rows(),
            a.cols(),
            d = n * m,
        )));
    }
    let mut out = ComplexMatrix::zeros(n, n);
    for ra in 0..n {
        for rb in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..m {
                acc += a[(ra * m + i, rb * m + i)];
            }
            out[(ra, rb)] = acc;
        }
    }
    Ok(out)
}

/// Contract the first tensor factor with `v`: returns the V₂ vector with
/// components Σ_a conj(v_a) · xi_{(a,b)}.
pub fn partial_inner_left(v: &StateVector, xi: &StateVector) -> Result<StateVector> {
    let d1 = v.dim();
    if !xi.dim().is_multiple_of(d1) {
        return Err(Error::DimensionMismatch(format!(
            "dim(xi) = {} is not divisible by dim(v) = {}",
            xi.dim(),
            d1
        )));
    }
    let d2 = xi.dim() / d1;
    let va = v.amplitudes();
    let xa = xi.amplitudes();
    let mut out = vec![C64::new(0.0, 0.0); d2];
    for a in 0..d1 {
        let ca = va[a].conj();
        if ca == C64::new(0.0, 0.0) {
            continue;
        }
        for (b, o) in out.iter_mut().enumerate() {
            *o += ca * xa[a * d2 + b];
        }
    }
    Ok(StateVector::new(out))
}

/// Deterministic Haar-like unitary: orthonormalization of a ChaCha8-seeded
/// complex Gaussian matrix (modified Gram-Schmidt, two passes).
pub fn random_unitary(dim: usize, seed: u64) -> ComplexMatrix {
    assert!(dim >= 1);
    let g = random_complex_gaussian(dim, dim, seed);
    let mut cols: Vec<Vec<C64>> = (0..dim)
        .map(|c| (0..dim).map(|r| g[(r, c)]).collect())
        .collect();
    for k in 0..dim {
        let (done, rest) = cols.split_at_mut(k);
        let col = &mut rest[0];
        for _pass in 0..2 {
            for q in done.iter() {
                let proj: C64 = q.iter().zip(col.iter()).map(|(q, a)| q.conj() * a).sum();
                for (a, &q) in col.iter_mut().zip(q.iter()) {
                    *a -= proj * q;
                }
            }
        }
        let norm: f64 = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(norm > 1e-12, "degenerate Gaussian draw");
        for z in col.iter_mut() {
            *z /= norm;
        }
    }
    ComplexMatrix::from_fn(dim, dim, |r, c| cols[c][r])
}

/// Deterministic dense Hermitian matrix: (G + G†)/2 of a ChaCha8-seeded
/// complex Gaussian matrix.
pub fn random_hermitian(dim: usize, seed: u64) -> ComplexMatrix {
    let g = random_complex_gaussian(dim, dim, seed);
    let ga = g.adjoint();
    g.add(&ga).scale(C64::new(0.5, 0.0))
}

fn random_complex_gaussian(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}
