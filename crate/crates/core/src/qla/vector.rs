use super::matrix::{ComplexMatrix, C64};

/// Dense complex state vector.
///
/// Nonzero scalar multiples represent the same physical state; operations
/// that care about scale (normalization, closeness) say so explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>) -> Self {
        assert!(!amplitudes.is_empty(), "state vector must have dim >= 1");
        Self { amplitudes }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(vec![C64::new(0.0, 0.0); dim])
    }

    /// Standard basis vector e_k.
    pub fn basis(dim: usize, k: usize) -> Self {
        assert!(k < dim);
        let mut v = Self::zeros(dim);
        v.amplitudes[k] = C64::new(1.0, 0.0);
        v
    }

    pub fn from_reals(values: &[f64]) -> Self {
        Self::new(values.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Inner product, conjugate-linear in `self`: Σ conj(self_k) · other_k.
    pub fn inner(&self, other: &StateVector) -> C64 {
        assert_eq!(self.dim(), other.dim());
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scale(&self, s: C64) -> StateVector {
        StateVector::new(self.amplitudes.iter().map(|z| z * s).collect())
    }

    pub fn normalized(&self) -> StateVector {
        let n = self.norm();
        assert!(n > 0.0, "cannot normalize the zero vector");
        self.scale(C64::new(1.0 / n, 0.0))
    }

    pub fn sub(&self, other: &StateVector) -> StateVector {
        assert_eq!(self.dim(), other.dim());
        StateVector::new(
            self.amplitudes
                .iter()
                .zip(&other.amplitudes)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Kronecker product of vectors: index (a, b) goes to a·dim(other) + b.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut out = Vec::with_capacity(self.dim() * other.dim());
        for &a in &self.amplitudes {
            for &b in &other.amplitudes {
                out.push(a * b);
            }
        }
        StateVector::new(out)
    }

    pub fn apply(&self, op: &ComplexMatrix) -> StateVector {
        StateVector::new(op.matvec(&self.amplitudes))
    }
}
