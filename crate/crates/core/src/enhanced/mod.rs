//! Enhanced approximate duals: the kernel
//! `L(x, y) = Φ_m(y) S_L Φ_m(x)ᵀ` with `S_L = S + Pᵀ U_m P`,
//! `P = D_{2m-1} ⋯ D_m`, which additionally reproduces the truncated powers
//! `(θ_ℓ - x)_+^{m-1-ν}` at a selection of interior knots.
//!
//! `U_m` solves `A U_m = B`, where row `(ℓ, ν)` of `A` holds scaled
//! derivatives of order-`2m` B-splines at `θ_ℓ` and the same row of `B` is
//! the defect `c_{ℓ,ν}ᵀ(I - ΓS)` with the derivative chain stripped off.

pub mod closed_form;

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::bspline::{eval_basis, truncated_power_coeffs, BsplineError, DerivativeMatrix};
use crate::gram_dual::{bilinear, derivative_chain, ApproxDual};
use crate::knots::{CoarseSelection, KnotVector};
use crate::linalg::{
    dense_solve_preconditioned, solve_normal_equations, BandedSymMatrix, DenseMatrix, LinalgError, SparseMatrix,
    Tolerances,
};

pub use closed_form::{closed_form_m2, closed_form_m3, ClosedFormError, M2ClosedForm, M3Coefficients};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnhancedError {
    #[error("selected knot {value} at index {index} is not the first occurrence of an interior knot")]
    InvalidSelection { index: usize, value: f64 },
    /// A coefficient of `w` that must vanish does not, or `w` does not
    /// reproduce `v` through the derivative chain.
    #[error("row {row}: coefficient {index} is {value:e}, allowed {bound:e}")]
    ZeroPatternViolation { row: usize, index: usize, value: f64, bound: f64 },
    #[error("A has deficient rank: {0}")]
    RankDeficient(LinalgError),
    #[error("selected columns of A are singular: {0}")]
    SingularA0(LinalgError),
    #[error("A U - B has max-abs {residual:e}, allowed {bound:e}")]
    Residual { residual: f64, bound: f64 },
    #[error(transparent)]
    Bspline(#[from] BsplineError),
}

/// How the right inverse of `A` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RightInverseMethod {
    /// `R = Aᵀ(AAᵀ)⁻¹`.
    MoorePenrose,
    /// Rows of `A₀⁻¹` placed at the columns `K` that form `A₀`.
    #[default]
    SelectedColumns,
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn check_selection(kv: &KnotVector, sel: &CoarseSelection) -> Result<(), EnhancedError> {
    for e in sel.entries() {
        if e.index >= kv.knots().len() || !kv.is_first_interior(e.index) || kv.knot(e.index) != e.value {
            return Err(EnhancedError::InvalidSelection { index: e.index, value: e.value });
        }
    }
    Ok(())
}

/// `A`, of size `r̃ × (n-m)`, with row `(ℓ, ν)` equal to
/// `(m-1-ν)! · N^{(ν)}_{2m,k}(θ_ℓ)`.
pub fn build_a(kv: &KnotVector, sel: &CoarseSelection) -> Result<SparseMatrix, EnhancedError> {
    check_selection(kv, sel)?;
    let m = kv.order();
    let cols = kv.dim() - m;
    let mut trip = Vec::new();
    for (row, (knot, nu)) in sel.rows().enumerate() {
        let w = eval_basis(kv, 2 * m, knot.value, nu)?;
        let scale = factorial(m - 1 - nu);
        for (i, v) in w.values.iter().enumerate() {
            trip.push((row, w.first + i, scale * v));
        }
    }
    Ok(SparseMatrix::from_triplets(sel.r_tilde(), cols, &trip))
}

/// Applies `D_m⁺ ⋯ D_{2m-1}⁺`, taking a length-`n` row to length `n - m`.
fn strip_chain(strippers: &[crate::bspline::StrippingMatrix], v: &[f64]) -> Vec<f64> {
    strippers.iter().fold(v.to_vec(), |acc, s| s.strip(&acc))
}

// |S| x for a banded symmetric S
fn abs_mul(s: &BandedSymMatrix, x: &[f64]) -> Vec<f64> {
    let n = s.dim();
    let bw = s.bandwidth();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(bw);
            let hi = (i + bw + 1).min(n);
            (lo..hi).map(|j| libm::fabs(s.get(i, j)) * libm::fabs(x[j])).sum()
        })
        .collect()
}

// |D|ᵀ y
fn abs_tr_mul(d: &DerivativeMatrix, y: &[f64]) -> Vec<f64> {
    let h = d.h();
    let mut out = vec![0.0; d.cols()];
    for (k, v) in y.iter().enumerate() {
        out[k] += v / h[k];
        out[k + 1] += v / h[k + 1];
    }
    out
}

/// The defect `v = c_{ℓ,ν}ᵀ(I - ΓS)` on the indices `lo..=hi` only, using
/// the entries of `Γ` and `S` that can reach them.
fn defect_window(
    gram: &BandedSymMatrix,
    s: &BandedSymMatrix,
    c: &[f64],
    c_last: usize,
    lo: usize,
    hi: usize,
) -> Vec<f64> {
    let n = c.len();
    let bw = s.bandwidth().max(gram.bandwidth());
    let jlo = lo.saturating_sub(bw);
    let jhi = (hi + bw).min(n - 1);
    let gc: Vec<f64> = (jlo..=jhi)
        .map(|j| {
            let ilo = j.saturating_sub(bw);
            let ihi = (j + bw).min(c_last);
            if ilo > ihi {
                0.0
            } else {
                (ilo..=ihi).map(|i| gram.get(j, i) * c[i]).sum()
            }
        })
        .collect();
    (lo..=hi)
        .map(|k| {
            let klo = k.saturating_sub(bw).max(jlo);
            let khi = (k + bw).min(jhi);
            c[k] - (klo..=khi).map(|j| s.get(k, j) * gc[j - jlo]).sum::<f64>()
        })
        .collect()
}

/// `B`, of size `r̃ × (n-m)`, whose row `(ℓ, ν)` is `w` with
/// `c_{ℓ,ν}ᵀ(I - ΓS) = w D_{2m-1} ⋯ D_m`.
///
/// The row is computed from the window of the defect that can reach the
/// nonzero part of `w` and then validated against the full defect: every
/// coefficient outside `[ℓ-2m+1+μ, ℓ-2]` must vanish and `w` must give
/// back `v` through the derivative chain, both relative to a rounding
/// envelope built from absolute values.
pub fn build_b(
    kv: &KnotVector,
    gram: &BandedSymMatrix,
    s: &BandedSymMatrix,
    sel: &CoarseSelection,
    tol: &Tolerances,
) -> Result<SparseMatrix, EnhancedError> {
    check_selection(kv, sel)?;
    let m = kv.order();
    let n = kv.dim();
    let cols = n - m;
    let derivs = (m..2 * m).map(|j| DerivativeMatrix::new(kv, j)).collect::<Result<Vec<_>, _>>()?;
    let strippers: Vec<_> = derivs.iter().map(|d| d.stripping()).collect();
    let mut trip = Vec::new();
    for (row, (knot, nu)) in sel.rows().enumerate() {
        let l = knot.index;
        let c = truncated_power_coeffs(kv, l, nu)?;
        let v = {
            let sgc = s.mul_vec(&gram.mul_vec(&c));
            c.iter().zip(&sgc).map(|(a, b)| a - b).collect::<Vec<_>>()
        };
        let abs_c: Vec<f64> = c.iter().map(|x| libm::fabs(*x)).collect();
        let envelope_v: Vec<f64> = {
            let sgc = abs_mul(s, &gram.mul_vec(&abs_c));
            abs_c.iter().zip(&sgc).map(|(a, b)| a + b).collect()
        };
        let w_full = strip_chain(&strippers, &v);
        let envelope_w = strip_chain(&strippers, &envelope_v);

        // support of w, clipped to the column range
        let lo = (l + 1 + knot.knot_mult).saturating_sub(2 * m);
        let hi = l.checked_sub(2).map(|h| h.min(cols - 1));
        for (k, (&wk, &ek)) in w_full.iter().zip(&envelope_w).enumerate() {
            let inside = hi.is_some_and(|h| k >= lo && k <= h);
            let bound = tol.zero_pattern * ek;
            if !inside && !(libm::fabs(wk) <= bound) {
                return Err(EnhancedError::ZeroPatternViolation { row, index: k, value: wk, bound });
            }
        }

        let mut back = w_full.clone();
        let mut envelope_back = envelope_w.clone();
        for d in derivs.iter().rev() {
            back = d.tr_mul_vec(&back);
            envelope_back = abs_tr_mul(d, &envelope_back);
        }
        for (k, ((a, b), e)) in back.iter().zip(&v).zip(&envelope_back).enumerate() {
            let bound = tol.strip_consistency * e.max(envelope_v[k]);
            if !(libm::fabs(a - b) <= bound) {
                return Err(EnhancedError::ZeroPatternViolation { row, index: k, value: a - b, bound });
            }
        }

        let Some(hi) = hi else { continue };
        if lo > hi {
            continue;
        }
        // w_k only depends on v_0..=v_k, and v vanishes below ℓ-2m+2
        let vlo = (l + 2).saturating_sub(2 * m);
        let c_last = (l + nu).saturating_sub(m);
        let window = defect_window(gram, s, &c, c_last, vlo, hi);
        let mut v_short = vec![0.0; n];
        v_short[vlo..=hi].copy_from_slice(&window);
        let mut w = strip_chain(&strippers, &v_short);
        refine_window(&derivs, &v, &mut w, lo, hi)?;
        for k in lo..=hi {
            let bound = tol.strip_consistency * envelope_w[k];
            if !(libm::fabs(w[k] - w_full[k]) <= bound) {
                return Err(EnhancedError::ZeroPatternViolation { row, index: k, value: w[k] - w_full[k], bound });
            }
            trip.push((row, k, w[k]));
        }
    }
    Ok(SparseMatrix::from_triplets(sel.r_tilde(), cols, &trip))
}

fn apply_chain_tr(derivs: &[DerivativeMatrix], w: &[f64]) -> Vec<f64> {
    derivs.iter().rev().fold(w.to_vec(), |acc, d| d.tr_mul_vec(&acc))
}

// Cumulative sums lose digits that the derivative chain then amplifies, so
// one least-squares correction on the window restores `w P = v`.
fn refine_window(
    derivs: &[DerivativeMatrix],
    v: &[f64],
    w: &mut [f64],
    lo: usize,
    hi: usize,
) -> Result<(), EnhancedError> {
    let cols = w.len();
    let mut windowed = vec![0.0; cols];
    windowed[lo..=hi].copy_from_slice(&w[lo..=hi]);
    let back = apply_chain_tr(derivs, &windowed);
    let m = derivs.len();
    let rows_hi = (hi + m).min(v.len() - 1);
    let width = hi - lo + 1;
    let mut p = DenseMatrix::zeros(rows_hi - lo + 1, width);
    let mut unit = vec![0.0; cols];
    for j in 0..width {
        unit[lo + j] = 1.0;
        let col = apply_chain_tr(derivs, &unit);
        unit[lo + j] = 0.0;
        for i in lo..=rows_hi {
            p[(i - lo, j)] = col[i];
        }
    }
    let r: Vec<f64> = (lo..=rows_hi).map(|i| v[i] - back[i]).collect();
    let (delta, _) = p.least_squares(&r).map_err(EnhancedError::RankDeficient)?;
    for (k, d) in (lo..=hi).zip(delta) {
        w[k] += d;
    }
    Ok(())
}

/// Column set `K = ∪_j {ℓ_j-m, …, ℓ_j-m+μ_j-1}` of `A₀`.
pub fn a0_columns(kv: &KnotVector, sel: &CoarseSelection) -> Vec<usize> {
    let m = kv.order();
    sel.entries().iter().flat_map(|e| (e.index - m)..(e.index - m + e.mult)).collect()
}

/// A right inverse `R` of `A` together with the condition estimate of the
/// row-scaled `A₀` when that route is used.
#[derive(Debug, Clone, PartialEq)]
pub struct RightInverse {
    pub r: SparseMatrix,
    pub condition: Option<f64>,
}

pub fn right_inverse(
    kv: &KnotVector,
    a: &SparseMatrix,
    sel: &CoarseSelection,
    method: RightInverseMethod,
) -> Result<RightInverse, EnhancedError> {
    let rt = a.rows();
    match method {
        RightInverseMethod::MoorePenrose => {
            let r = solve_normal_equations(a, &SparseMatrix::identity(rt)).map_err(EnhancedError::RankDeficient)?;
            Ok(RightInverse { r, condition: None })
        }
        RightInverseMethod::SelectedColumns => {
            let k = a0_columns(kv, sel);
            let a0 = a.to_dense().select_columns(&k);
            let (inv, cond) =
                dense_solve_preconditioned(&a0, &DenseMatrix::identity(rt)).map_err(EnhancedError::SingularA0)?;
            Ok(RightInverse { r: place_rows(&inv, &k, a.cols()), condition: Some(cond) })
        }
    }
}

fn place_rows(x: &DenseMatrix, positions: &[usize], rows: usize) -> SparseMatrix {
    let mut trip = Vec::new();
    for (i, &p) in positions.iter().enumerate() {
        for j in 0..x.cols() {
            trip.push((p, j, x[(i, j)]));
        }
    }
    SparseMatrix::from_triplets(rows, x.cols(), &trip)
}

/// `U_m = R B`, computed without forming `R` when the selected-columns
/// route is used.
fn solve_um(
    kv: &KnotVector,
    a: &SparseMatrix,
    b: &SparseMatrix,
    sel: &CoarseSelection,
    method: RightInverseMethod,
) -> Result<SparseMatrix, EnhancedError> {
    match method {
        RightInverseMethod::MoorePenrose => solve_normal_equations(a, b).map_err(EnhancedError::RankDeficient),
        RightInverseMethod::SelectedColumns => {
            let k = a0_columns(kv, sel);
            let a0 = a.to_dense().select_columns(&k);
            let (x, _) = dense_solve_preconditioned(&a0, &b.to_dense()).map_err(EnhancedError::SingularA0)?;
            Ok(place_rows(&x, &k, a.cols()))
        }
    }
}

/// `S_L = S + D_mᵀ ⋯ D_{2m-1}ᵀ U_m D_{2m-1} ⋯ D_m`.
pub fn assemble_sl(base: &ApproxDual, um: &SparseMatrix) -> Result<SparseMatrix, EnhancedError> {
    let p = derivative_chain(base.knots(), base.order())?;
    let correction = p.transpose().matmul(&um.matmul(&p));
    Ok(base.s().to_sparse().add(&correction))
}

/// An approximate dual enhanced to reproduce truncated powers at selected
/// knots.
#[derive(Debug, Clone)]
pub struct EnhancedDual {
    base: ApproxDual,
    sel: CoarseSelection,
    a: SparseMatrix,
    b: SparseMatrix,
    r: SparseMatrix,
    um: SparseMatrix,
    sl: SparseMatrix,
    method: RightInverseMethod,
    condition: Option<f64>,
}

impl EnhancedDual {
    pub fn new(base: ApproxDual, sel: CoarseSelection, method: RightInverseMethod) -> Result<Self, EnhancedError> {
        Self::with_tolerances(base, sel, method, &Tolerances::default())
    }

    pub fn with_tolerances(
        base: ApproxDual,
        sel: CoarseSelection,
        method: RightInverseMethod,
        tol: &Tolerances,
    ) -> Result<Self, EnhancedError> {
        let kv = base.knots();
        let a = build_a(kv, &sel)?;
        let b = build_b(kv, base.gram(), base.s(), &sel, tol)?;
        let RightInverse { r, condition } = right_inverse(kv, &a, &sel, method)?;
        let um =
            if sel.is_empty() { SparseMatrix::zeros(a.cols(), a.cols()) } else { solve_um(kv, &a, &b, &sel, method)? };
        let residual = a.matmul(&um).add(&b.scaled(-1.0)).max_abs();
        let bound = tol.right_inverse * b.max_abs();
        if !(residual <= bound) {
            return Err(EnhancedError::Residual { residual, bound });
        }
        let sl = assemble_sl(&base, &um)?;
        Ok(Self { base, sel, a, b, r, um, sl, method, condition })
    }

    pub fn base(&self) -> &ApproxDual {
        &self.base
    }

    pub fn selection(&self) -> &CoarseSelection {
        &self.sel
    }

    pub fn a(&self) -> &SparseMatrix {
        &self.a
    }

    pub fn b(&self) -> &SparseMatrix {
        &self.b
    }

    /// The right inverse of `A` used for `U_m`.
    pub fn r(&self) -> &SparseMatrix {
        &self.r
    }

    pub fn um(&self) -> &SparseMatrix {
        &self.um
    }

    pub fn sl(&self) -> &SparseMatrix {
        &self.sl
    }

    pub fn method(&self) -> RightInverseMethod {
        self.method
    }

    /// 1-norm condition number of the row-scaled `A₀`, for the
    /// selected-columns route.
    pub fn condition(&self) -> Option<f64> {
        self.condition
    }

    /// Largest `|i - j|` with a nonzero `S_L` entry.
    pub fn sl_bandwidth(&self) -> usize {
        self.sl.bandwidth()
    }

    /// `L(x, y) = Φ_m(y) S_L Φ_m(x)ᵀ`; not symmetric in general.
    pub fn kernel(&self, x: f64, y: f64) -> Result<f64, BsplineError> {
        let kv = self.base.knots();
        let m = kv.order();
        let wx = eval_basis(kv, m, x, 0)?;
        let wy = eval_basis(kv, m, y, 0)?;
        Ok(bilinear(&wy.first, &wy.values, &wx.first, &wx.values, |i, j| self.sl.get(i, j)))
    }
}
