//! Linear algebra used by the solvers: Hermitian band factorizations,
//! sparse storage, and iterative eigensolvers for the bottom of the
//! spectrum.

pub mod banded;
pub mod eigen;
pub mod sparse;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

pub use banded::{BandLdl, HermitianBand};
pub use eigen::{EigenOptions, EigenPairs};
pub use sparse::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("zero pivot {value:e} at index {index} in LDLᴴ factorization")]
    ZeroPivot { index: usize, value: f64 },
    #[error("eigensolver did not converge after {iterations} iterations; worst relative residual {worst_residual:e}")]
    NotConverged { iterations: usize, worst_residual: f64, residuals: Vec<f64> },
    #[error("requested {requested} eigenpairs from a matrix of dimension {dim}")]
    TooManyPairs { requested: usize, dim: usize },
}

pub(crate) fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// `⟨a, b⟩ = Σ conj(a_i) b_i`
pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).fold(zero(), |s, (x, y)| s + x.conj() * y)
}

pub fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Dense Hermitian eigendecomposition, eigenvalues ascending with matching
/// eigenvector columns.
pub fn hermitian_eigh(mut a: DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let n = a.nrows();
    // Symmetrize so that rounding in the caller cannot leak in.
    for i in 0..n {
        a[(i, i)].im = 0.0;
        for j in 0..i {
            let v = 0.5 * (a[(i, j)] + a[(j, i)].conj());
            a[(i, j)] = v;
            a[(j, i)] = v.conj();
        }
    }
    let eig = nalgebra::linalg::SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_hermitian_eigh_is_sorted_and_correct() {
        let c = Complex64::new;
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)],
        );
        let (vals, vecs) = hermitian_eigh(a.clone());
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
        let v0 = vecs.column(0).into_owned();
        let r = &a * &v0 - v0.scale(vals[0]);
        assert!(r.norm() < 1e-14);
    }
}
