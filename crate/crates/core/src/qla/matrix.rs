use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;

/// Dense complex matrix, entries stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for k in 0..dim {
            m[(k, k)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Build from a row-major entry buffer. Panics if the buffer length does
    /// not equal `rows * cols`.
    pub fn from_entries(rows: usize, cols: usize, entries: Vec<C64>) -> Self {
        assert_eq!(
            entries.len(),
            rows * cols,
            "entry buffer length {} != {}x{}",
            entries.len(),
            rows,
            cols
        );
        Self {
            rows,
            cols,
            entries,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                entries.push(f(r, c));
            }
        }
        Self {
            rows,
            cols,
            entries,
        }
    }

    /// Square matrix with the given real diagonal.
    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (k, &d) in diag.iter().enumerate() {
            m[(k, k)] = C64::new(d, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn matmul(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.entries[r * self.cols + k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let lhs_row = &rhs.entries[k * rhs.cols..(k + 1) * rhs.cols];
                let out_row = &mut out.entries[r * rhs.cols..(r + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(lhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Matrix-vector product on a raw amplitude slice.
    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, x.len(), "matvec shape mismatch");
        self.entries
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn add(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let entries = self
            .entries
            .iter()
            .zip(&rhs.entries)
            .map(|(a, b)| a + b)
            .collect();
        ComplexMatrix::from_entries(self.rows, self.cols, entries)
    }

    pub fn sub(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let entries = self
            .entries
            .iter()
            .zip(&rhs.entries)
            .map(|(a, b)| a - b)
            .collect();
        ComplexMatrix::from_entries(self.rows, self.cols, entries)
    }

    pub fn scale(&self, s: C64) -> ComplexMatrix {
        let entries = self.entries.iter().map(|a| a * s).collect();
        ComplexMatrix::from_entries(self.rows, self.cols, entries)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn trace(&self) -> C64 {
        assert!(self.is_square());
        (0..self.rows).map(|k| self[(k, k)]).sum()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Max-entry norm of `self - rhs`.
    pub fn max_abs_diff(&self, rhs: &ComplexMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        self.entries
            .iter()
            .zip(&rhs.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// ‖A − A†‖_max.
    pub fn hermitian_defect(&self) -> f64 {
        assert!(self.is_square());
        let mut worst = 0.0f64;
        for r in 0..self.rows {
            for c in r..self.cols {
                let d = (self[(r, c)] - self[(c, r)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.hermitian_defect() <= tol
    }

    /// ‖U†U − I‖_max.
    pub fn unitarity_defect(&self) -> f64 {
        assert!(self.is_square());
        let gram = self.adjoint().matmul(self);
        gram.max_abs_diff(&ComplexMatrix::identity(self.rows))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.is_square() && self.unitarity_defect() <= tol
    }

    /// Eigendecomposition of a Hermitian matrix: returns eigenvalues in
    /// ascending order and the matching unitary of column eigenvectors.
    ///
    /// The caller is responsible for Hermiticity; the input is symmetrized
    /// as (A + A†)/2 before decomposing so roundoff asymmetry cannot leak in.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, ComplexMatrix) {
        assert!(self.is_square());
        let n = self.rows;
        let a = na_from(self);
        let sym = DMatrix::from_fn(n, n, |r, c| 0.5 * (a[(r, c)] + a[(c, r)].conj()));
        let eig = sym.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = ComplexMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        (values, vectors)
    }

    /// Singular values in descending order.
    pub fn singular_values(&self) -> Vec<f64> {
        let sv = na_from(self).singular_values();
        let mut out: Vec<f64> = sv.iter().copied().collect();
        out.sort_by(|a, b| b.total_cmp(a));
        out
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.entries[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.entries[r * self.cols + c]
    }
}

fn na_from(m: &ComplexMatrix) -> DMatrix<C64> {
    DMatrix::from_fn(m.rows(), m.cols(), |r, c| m[(r, c)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn matmul_against_hand_product() {
        let a = ComplexMatrix::from_entries(
            2,
            2,
            vec![c(1.0, 0.0), c(0.0, 1.0), c(2.0, 0.0), c(0.0, 0.0)],
        );
        let b = ComplexMatrix::from_entries(
            2,
            2,
            vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, -1.0)],
        );
        let p = a.matmul(&b);
        // row 0: [i*1, 1 + i*(-i)] = [i, 2]
        assert_eq!(p[(0, 0)], c(0.0, 1.0));
        assert_eq!(p[(0, 1)], c(2.0, 0.0));
        // row 1: [0, 2]
        assert_eq!(p[(1, 0)], c(0.0, 0.0));
        assert_eq!(p[(1, 1)], c(2.0, 0.0));
    }

    #[test]
    fn adjoint_conjugates_and_transposes() {
        let a = ComplexMatrix::from_entries(1, 2, vec![c(1.0, 2.0), c(3.0, -4.0)]);
        let ad = a.adjoint();
        assert_eq!(ad.rows(), 2);
        assert_eq!(ad.cols(), 1);
        assert_eq!(ad[(0, 0)], c(1.0, -2.0));
        assert_eq!(ad[(1, 0)], c(3.0, 4.0));
    }

    #[test]
    fn hermitian_defect_detects_asymmetry() {
        let h = ComplexMatrix::from_entries(
            2,
            2,
            vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(2.0, 0.0)],
        );
        // h[0][1] = i but h[1][0] = i, conj mismatch: defect = |i - (-i)| = 2
        assert!((h.hermitian_defect() - 2.0).abs() < 1e-15);

        let h2 = ComplexMatrix::from_entries(
            2,
            2,
            vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)],
        );
        assert_eq!(h2.hermitian_defect(), 0.0);
        assert!(h2.is_hermitian(1e-12));
    }

    #[test]
    fn hermitian_eigen_recomposes() {
        // Pauli Y: eigenvalues -1, +1.
        let y = ComplexMatrix::from_entries(
            2,
            2,
            vec![c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)],
        );
        let (vals, q) = y.hermitian_eigen();
        assert!((vals[0] + 1.0).abs() < 1e-14);
        assert!((vals[1] - 1.0).abs() < 1e-14);
        assert!(q.is_unitary(1e-12));
        let lambda = ComplexMatrix::from_real_diagonal(&vals);
        let back = q.matmul(&lambda).matmul(&q.adjoint());
        assert!(back.max_abs_diff(&y) < 1e-14);
    }

    #[test]
    fn singular_values_of_single_row_matrix() {
        // One nonzero row: singular values are (row norm, 0, 0).
        let m = ComplexMatrix::from_entries(
            3,
            3,
            vec![
                c(3.0, 0.0),
                c(0.0, 4.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
            ],
        );
        let sv = m.singular_values();
        assert!((sv[0] - 5.0).abs() < 1e-12);
        assert!(sv[1] < 1e-12);
        assert!(sv[2] < 1e-12);
    }
}
