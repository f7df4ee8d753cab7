//! Small dense, banded and coordinate-format linear algebra, plus
//! Gauss–Legendre quadrature.
//!
//! Everything in here is sized for desk-scale problems: spline spaces of a
//! few hundred basis functions and right-hand sides with a handful of rows.

mod banded;
mod dense;
mod quadrature;
mod sparse;
mod tol;

pub use banded::{cholesky_banded_solve, BandedCholesky, BandedSymMatrix};
pub use dense::{DenseMatrix, Lu};
pub use quadrature::{gauss_legendre, QuadratureRule, MAX_GAUSS_POINTS};
pub use sparse::SparseMatrix;
pub use tol::Tolerances;

pub(crate) use quadrature::rule;

use thiserror::Error;

/// Failures of the linear algebra layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("matrix is rank deficient (pivot {pivot:e} at index {index})")]
    RankDeficient { index: usize, pivot: f64 },
    #[error("matrix is numerically singular (pivot {pivot:e} at column {column})")]
    Singular { column: usize, pivot: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(&'static str),
    #[error("Gauss-Legendre rules are available for 1..={max} points, requested {requested}")]
    UnsupportedRule { requested: usize, max: usize },
}

/// Moore–Penrose application `Aᵀ(AAᵀ)⁻¹B` for a short, wide matrix `A` of
/// full row rank.
///
/// `AAᵀ` is factored densely; it is `r̃ × r̃` with `r̃` the number of rows
/// of `A`, which stays in single digits for every use in this crate.
pub fn solve_normal_equations(a: &SparseMatrix, b: &SparseMatrix) -> Result<SparseMatrix, LinalgError> {
    if a.rows() != b.rows() {
        return Err(LinalgError::DimensionMismatch("A and B must have equal row counts"));
    }
    // equilibrating the rows leaves Aᵀ(AAᵀ)⁻¹B unchanged when B is scaled alike
    let mut norm2 = alloc::vec![0.0; a.rows()];
    for &(i, _, v) in a.entries() {
        norm2[i] += v * v;
    }
    let scale: alloc::vec::Vec<f64> = norm2.iter().map(|&s| if s > 0.0 { 1.0 / libm::sqrt(s) } else { 1.0 }).collect();
    let scale_rows = |m: &SparseMatrix| {
        let trip: alloc::vec::Vec<_> = m.entries().iter().map(|&(i, j, v)| (i, j, v * scale[i])).collect();
        SparseMatrix::from_triplets(m.rows(), m.cols(), &trip)
    };
    let a = &scale_rows(a);
    let aat = a.mul_transpose_dense();
    let b_dense = scale_rows(b).to_dense();
    let y = aat.cholesky_solve(&b_dense).map_err(|e| match e {
        LinalgError::NotPositiveDefinite { row, pivot } => LinalgError::RankDeficient { index: row, pivot },
        other => other,
    })?;
    Ok(SparseMatrix::from_dense(&a.transpose().mul_dense(&y)))
}

/// Solves `A₀X = B₀` after dividing every row of `A₀` (and `B₀`) by the
/// largest absolute entry of that row of `A₀`.
///
/// Returns the solution and the 1-norm condition number of the row-scaled
/// matrix.
pub fn dense_solve_preconditioned(a0: &DenseMatrix, b0: &DenseMatrix) -> Result<(DenseMatrix, f64), LinalgError> {
    if a0.rows() != a0.cols() || a0.rows() != b0.rows() {
        return Err(LinalgError::DimensionMismatch("A0 must be square and match B0"));
    }
    let mut a = a0.clone();
    let mut b = b0.clone();
    for i in 0..a.rows() {
        let scale = (0..a.cols()).fold(0.0_f64, |acc, j| acc.max(libm::fabs(a[(i, j)])));
        if scale == 0.0 {
            return Err(LinalgError::Singular { column: i, pivot: 0.0 });
        }
        for j in 0..a.cols() {
            a[(i, j)] /= scale;
        }
        for j in 0..b.cols() {
            b[(i, j)] /= scale;
        }
    }
    let lu = a.lu()?;
    let inverse = lu.solve(&DenseMatrix::identity(a.rows()));
    let cond = a.norm_1() * inverse.norm_1();
    Ok((lu.solve(&b), cond))
}
