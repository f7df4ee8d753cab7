//! Quasi-projections driven by the kernels `K` and `L`, the orthogonal
//! projection they are compared against, and L² error measurement.
//!
//! All three work in coefficient space: the moments `g_k = ∫ f N_{m,k}` are
//! computed by spanwise Gauss–Legendre quadrature and then mapped to spline
//! coefficients.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::bspline::{eval_basis, BsplineError, Spline};
use crate::enhanced::EnhancedDual;
use crate::gram_dual::{gram_matrix, ApproxDual};
use crate::knots::KnotVector;
use crate::linalg::{rule, BandedCholesky, BandedSymMatrix, LinalgError, SparseMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProjectionError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Bspline(#[from] BsplineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProjectorKind {
    K,
    L,
    Orthogonal,
}

#[derive(Debug, Clone)]
enum Operator {
    Dual(BandedSymMatrix),
    Enhanced(SparseMatrix),
    Gram(BandedCholesky),
}

/// A linear map from functions to splines of order `m` on a fixed knot vector.
#[derive(Debug, Clone)]
pub struct Projector {
    kind: ProjectorKind,
    op: Operator,
    kv: KnotVector,
    quad_points_per_span: usize,
}

impl Projector {
    /// `𝒦f = ∫ f(y) K(·, y) dy`.
    pub fn k(dual: &ApproxDual) -> Self {
        Self::build(ProjectorKind::K, Operator::Dual(dual.s().clone()), dual.knots().clone())
    }

    /// `𝓛f = ∫ f(y) L(·, y) dy`.
    pub fn l(dual: &EnhancedDual) -> Self {
        Self::build(ProjectorKind::L, Operator::Enhanced(dual.sl().clone()), dual.base().knots().clone())
    }

    /// The L² orthogonal projection onto the spline space.
    pub fn orthogonal(kv: &KnotVector) -> Result<Self, ProjectionError> {
        let chol = gram_matrix(kv).cholesky()?;
        Ok(Self::build(ProjectorKind::Orthogonal, Operator::Gram(chol), kv.clone()))
    }

    fn build(kind: ProjectorKind, op: Operator, kv: KnotVector) -> Self {
        let quad_points_per_span = 2 * kv.order() + 2;
        Self { kind, op, kv, quad_points_per_span }
    }

    /// Overrides the number of moment quadrature points per span.
    pub fn with_quad_points(mut self, points: usize) -> Self {
        self.quad_points_per_span = points;
        self
    }

    pub fn kind(&self) -> ProjectorKind {
        self.kind
    }

    pub fn knots(&self) -> &KnotVector {
        &self.kv
    }

    pub fn order(&self) -> usize {
        self.kv.order()
    }

    pub fn quad_points_per_span(&self) -> usize {
        self.quad_points_per_span
    }

    /// Spline coefficients for the moment vector `g`.
    pub fn coefficients(&self, g: &[f64]) -> Vec<f64> {
        match &self.op {
            Operator::Dual(s) => s.mul_vec(g),
            // S_L is not symmetric; the kernel integrates against its rows
            Operator::Enhanced(sl) => sl.tr_mul_vec(g),
            Operator::Gram(chol) => chol.solve(g),
        }
    }

    /// `breakpoints` must contain every point in the interior of the
    /// interval where `f` is not smooth.
    pub fn project(&self, f: impl Fn(f64) -> f64, breakpoints: &[f64]) -> Result<Spline, ProjectionError> {
        let g = moments_with(&self.kv, &f, breakpoints, self.quad_points_per_span)?;
        Ok(Spline::new(self.kv.clone(), self.kv.order(), self.coefficients(&g))?)
    }
}

// Knots and extra breakpoints inside [a, b], sorted and deduplicated.
fn pieces(kv: &KnotVector, breakpoints: &[f64]) -> Vec<f64> {
    let (a, b) = (kv.a(), kv.b());
    let mut pts = kv.breakpoints();
    pts.extend(breakpoints.iter().copied().filter(|&x| x > a && x < b));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Moments `g_k = ∫ f N_{m,k}` with `2m + 2` Gauss points per piece.
pub fn moments(kv: &KnotVector, f: impl Fn(f64) -> f64, breakpoints: &[f64]) -> Result<Vec<f64>, ProjectionError> {
    moments_with(kv, &f, breakpoints, 2 * kv.order() + 2)
}

/// Moments with `points` Gauss points on every piece between consecutive
/// knots and breakpoints.
pub fn moments_with(
    kv: &KnotVector,
    f: &impl Fn(f64) -> f64,
    breakpoints: &[f64],
    points: usize,
) -> Result<Vec<f64>, ProjectionError> {
    let quad = rule(points)?;
    let m = kv.order();
    let mut g = vec![0.0; kv.dim()];
    for piece in pieces(kv, breakpoints).windows(2) {
        for (x, w) in quad.mapped(piece[0], piece[1]) {
            let win = eval_basis(kv, m, x, 0)?;
            let fx = w * f(x);
            for (i, v) in win.values.iter().enumerate() {
                g[win.first + i] += fx * v;
            }
        }
    }
    Ok(g)
}

/// `‖f − s‖_{L²}` with `2m + 4` Gauss points per piece.
pub fn l2_error(f: impl Fn(f64) -> f64, s: &Spline, breakpoints: &[f64]) -> Result<f64, ProjectionError> {
    let quad = rule(2 * s.order() + 4)?;
    let mut sum = 0.0;
    for piece in pieces(s.knots(), breakpoints).windows(2) {
        for (x, w) in quad.mapped(piece[0], piece[1]) {
            let d = f(x) - s.eval(x, 0)?;
            sum += w * d * d;
        }
    }
    Ok(libm::sqrt(sum))
}
