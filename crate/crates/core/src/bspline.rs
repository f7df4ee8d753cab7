//! B-spline evaluation at orders `m..=2m` on a shared knot vector,
//! derivative and stripping matrices, and Marsden-type coefficient vectors.
//!
//! The order-`q` B-splines on a knot vector of order `m` are the `n + m - q`
//! functions `N_{q,k}` supported on `[θ_k, θ_{k+q}]`. For `q > m` the
//! endpoint knots have multiplicity below `q`, so those functions no longer
//! sum to one next to the endpoints.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::knots::KnotVector;
use crate::linalg::{DenseMatrix, SparseMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BsplineError {
    #[error("abscissa {x} lies outside [{a}, {b}]")]
    OutOfDomain { x: f64, a: f64, b: f64 },
    #[error("order {q} is outside {min}..={max}")]
    OrderOutOfRange { q: usize, min: usize, max: usize },
    #[error("index {0} is not the first occurrence of an interior knot")]
    BadIndex(usize),
    #[error("derivative order {nu} needs a knot of multiplicity above {nu}, found {mult}")]
    MultiplicityViolation { nu: usize, mult: usize },
    #[error("expected {expected} coefficients, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("interpolation system at the Greville abscissae is singular")]
    SingularSystem,
    #[error("function is not in the spline space: residual {residual:e} exceeds {tol:e}")]
    ResidualTooLarge { residual: f64, tol: f64 },
}

fn check_order(kv: &KnotVector, q: usize) -> Result<(), BsplineError> {
    let m = kv.order();
    if q < m || q > 2 * m || q > kv.knots().len() - 1 {
        return Err(BsplineError::OrderOutOfRange { q, min: m, max: 2 * m });
    }
    Ok(())
}

/// Values of the basis functions that may be nonzero at one abscissa.
///
/// `values[i]` belongs to basis function `first + i`; every other basis
/// function vanishes there.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisWindow {
    pub first: usize,
    pub values: Vec<f64>,
}

impl BasisWindow {
    /// `Σ_i values[i] · coeffs[first + i]`.
    pub fn dot(&self, coeffs: &[f64]) -> f64 {
        self.values.iter().zip(&coeffs[self.first..]).map(|(v, c)| v * c).sum()
    }

    /// Scatters into a dense row of length `len`.
    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut row = vec![0.0; len];
        row[self.first..self.first + self.values.len()].copy_from_slice(&self.values);
        row
    }
}

/// All derivatives `0..=max_deriv` of the order-`q` basis at `x`, one row
/// per derivative order, sharing the index window starting at `first`.
pub fn eval_basis_derivs(
    kv: &KnotVector,
    q: usize,
    x: f64,
    max_deriv: usize,
) -> Result<(usize, Vec<Vec<f64>>), BsplineError> {
    check_order(kv, q)?;
    let span = kv.span(x).ok_or(BsplineError::OutOfDomain { x, a: kv.a(), b: kv.b() })?;
    let m = kv.order();
    let pad = q - m;
    let t = kv.knots();
    // knot sequence padded with `pad` extra copies of a and b; index shift `pad`
    let knot = |i: isize| -> f64 {
        let j = i - pad as isize;
        if j < 0 {
            t[0]
        } else if j as usize >= t.len() {
            t[t.len() - 1]
        } else {
            t[j as usize]
        }
    };
    let p = q - 1;
    let s = (span + pad) as isize;
    let ders = derivatives_in_span(&knot, s, p, x, max_deriv);

    // padded index s - p + i  ↔  original index span + 1 - q + i
    let first_raw = span as isize + 1 - q as isize;
    let lo = (-first_raw).max(0) as usize;
    let count = kv.dim_of_order(q);
    let hi = ((count as isize - first_raw).min(q as isize)).max(0) as usize;
    let first = (first_raw + lo as isize) as usize;
    let rows = ders.into_iter().map(|row| row[lo..hi].to_vec()).collect();
    Ok((first, rows))
}

/// Derivative `deriv` of the order-`q` basis at `x`. At `x = b` the limit
/// from the left is taken.
pub fn eval_basis(kv: &KnotVector, q: usize, x: f64, deriv: usize) -> Result<BasisWindow, BsplineError> {
    let (first, mut rows) = eval_basis_derivs(kv, q, x, deriv)?;
    Ok(BasisWindow { first, values: rows.swap_remove(deriv) })
}

// Triangular-table evaluation of all nonzero basis functions of degree `p`
// and their derivatives in span `s` (`knot(s) ≤ x < knot(s+1)`). The span is
// nonempty, so no division by a zero knot difference can occur.
fn derivatives_in_span(knot: &impl Fn(isize) -> f64, s: isize, p: usize, x: f64, nd: usize) -> Vec<Vec<f64>> {
    let mut ndu = vec![vec![0.0; p + 1]; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    ndu[0][0] = 1.0;
    for j in 1..=p {
        left[j] = x - knot(s + 1 - j as isize);
        right[j] = knot(s + j as isize) - x;
        let mut saved = 0.0;
        for r in 0..j {
            // lower triangle holds knot differences
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    let mut ders = vec![vec![0.0; p + 1]; nd + 1];
    for j in 0..=p {
        ders[0][j] = ndu[j][p];
    }
    let top = nd.min(p);
    let mut a = [vec![0.0; p + 1], vec![0.0; p + 1]];
    for r in 0..=p {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0].iter_mut().for_each(|v| *v = 0.0);
        a[0][0] = 1.0;
        for k in 1..=top {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = p - k;
            if r >= k {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                d = a[s2][0] * ndu[rk as usize][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if r as isize - 1 <= pk as isize { k - 1 } else { p - r };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                d += a[s2][j] * ndu[idx][pk];
            }
            if r <= pk {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            core::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut factor = p as f64;
    for k in 1..=top {
        for v in ders[k].iter_mut() {
            *v *= factor;
        }
        factor *= (p - k) as f64;
    }
    ders
}

/// Bidiagonal matrix `D_j` of size `(n+m-j-1) × (n+m-j)` with
/// `1/h_{j,k}` at `(k, k)` and `-1/h_{j,k+1}` at `(k, k+1)`.
///
/// It maps coefficients of order-`j` splines to coefficients of their
/// derivative in order `j+1`: the row of derivatives `N'_{j+1,·}` equals the
/// order-`j` row times `D_jᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeMatrix {
    j: usize,
    h: Vec<f64>,
}

impl DerivativeMatrix {
    pub fn new(kv: &KnotVector, j: usize) -> Result<Self, BsplineError> {
        let m = kv.order();
        if j < m || j >= 2 * m || j + 1 >= kv.knots().len() {
            return Err(BsplineError::OrderOutOfRange { q: j, min: m, max: 2 * m - 1 });
        }
        let h = (0..kv.dim_of_order(j)).map(|k| kv.h(j, k)).collect();
        Ok(Self { j, h })
    }

    pub fn j(&self) -> usize {
        self.j
    }

    /// The knot averages `h_{j,k}`, one per column.
    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn rows(&self) -> usize {
        self.h.len() - 1
    }

    pub fn cols(&self) -> usize {
        self.h.len()
    }

    /// `D x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols());
        (0..self.rows()).map(|k| x[k] / self.h[k] - x[k + 1] / self.h[k + 1]).collect()
    }

    /// `Dᵀ y`, equivalently the row vector `y D`.
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows());
        let mut out = vec![0.0; self.cols()];
        for (k, v) in y.iter().enumerate() {
            out[k] += v / self.h[k];
            out[k + 1] -= v / self.h[k + 1];
        }
        out
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        let mut t = Vec::with_capacity(2 * self.rows());
        for k in 0..self.rows() {
            t.push((k, k, 1.0 / self.h[k]));
            t.push((k, k + 1, -1.0 / self.h[k + 1]));
        }
        SparseMatrix::from_triplets(self.rows(), self.cols(), &t)
    }

    /// The right inverse `D⁺ = diag(h) T`, with `T` the upper triangle of
    /// ones with its last row zeroed.
    pub fn stripping(&self) -> StrippingMatrix {
        StrippingMatrix { h: self.h.clone() }
    }
}

/// `D_j⁺` of size `(n+m-j) × (n+m-j-1)`, satisfying `D_j D_j⁺ = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrippingMatrix {
    h: Vec<f64>,
}

impl StrippingMatrix {
    /// Row vector `v D⁺`: the running sum of `v_i h_i`, dropping the total.
    pub fn strip(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.h.len());
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(v.len() - 1);
        for i in 0..v.len() - 1 {
            acc += v[i] * self.h[i];
            out.push(acc);
        }
        out
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let len = self.h.len();
        DenseMatrix::from_fn(len, len - 1, |i, k| if i <= k { self.h[i] } else { 0.0 })
    }
}

/// Elementary symmetric polynomial `σ_r` of `args`; `σ_0 = 1` and
/// `σ_r = 0` for `r > args.len()`.
pub fn elementary_symmetric(args: &[f64], r: usize) -> f64 {
    if r > args.len() {
        return 0.0;
    }
    let mut e = vec![0.0; r + 1];
    e[0] = 1.0;
    for (i, &y) in args.iter().enumerate() {
        for j in (1..=r.min(i + 1)).rev() {
            e[j] += e[j - 1] * y;
        }
    }
    e[r]
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut b = 1.0;
    for i in 0..k {
        b = b * (n - i) as f64 / (i + 1) as f64;
    }
    b
}

/// Coefficients of `x ↦ (t - x)^{m-1-ν}` in the order-`m` basis:
/// `σ_{m-1-ν}(t - θ_{k+1}, …, t - θ_{k+m-1}) / C(m-1, ν)`.
pub fn marsden_coeffs(kv: &KnotVector, nu: usize, t: f64) -> Vec<f64> {
    let m = kv.order();
    assert!(nu < m, "power must be non-negative");
    let th = kv.knots();
    let scale = binomial(m - 1, nu);
    let mut args = vec![0.0; m - 1];
    (0..kv.dim())
        .map(|k| {
            for (a, &tk) in args.iter_mut().zip(&th[k + 1..k + m]) {
                *a = t - tk;
            }
            elementary_symmetric(&args, m - 1 - nu) / scale
        })
        .collect()
}

/// Coefficients of `((x - center) / scale)^p` in the order-`m` basis.
pub fn monomial_coeffs(kv: &KnotVector, p: usize, center: f64, scale: f64) -> Vec<f64> {
    let m = kv.order();
    assert!(p < m, "degree must be below the order");
    let th = kv.knots();
    let c = binomial(m - 1, p);
    let mut args = vec![0.0; m - 1];
    (0..kv.dim())
        .map(|k| {
            for (a, &tk) in args.iter_mut().zip(&th[k + 1..k + m]) {
                *a = (tk - center) / scale;
            }
            elementary_symmetric(&args, p) / c
        })
        .collect()
}

/// Coefficients `c_{ℓ,ν}` of the truncated power `(θ_ℓ - x)_+^{m-1-ν}`,
/// for `ℓ` the first index of an interior knot and `ν` below its
/// multiplicity. Entries past `ℓ - m + ν` are exactly zero.
pub fn truncated_power_coeffs(kv: &KnotVector, l: usize, nu: usize) -> Result<Vec<f64>, BsplineError> {
    if !kv.is_first_interior(l) {
        return Err(BsplineError::BadIndex(l));
    }
    let th = kv.knots();
    let mult = kv.multiplicity(th[l]);
    if nu >= mult {
        return Err(BsplineError::MultiplicityViolation { nu, mult });
    }
    let m = kv.order();
    let scale = binomial(m - 1, nu);
    let last = l + nu - m;
    let mut args = vec![0.0; m - 1];
    Ok((0..kv.dim())
        .map(|k| {
            if k > last {
                return 0.0;
            }
            for (a, &tk) in args.iter_mut().zip(&th[k + 1..k + m]) {
                *a = th[l] - tk;
            }
            elementary_symmetric(&args, m - 1 - nu) / scale
        })
        .collect())
}

/// A spline of order `q` on the knots of `kv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spline {
    kv: KnotVector,
    order: usize,
    coeffs: Vec<f64>,
}

impl Spline {
    pub fn new(kv: KnotVector, order: usize, coeffs: Vec<f64>) -> Result<Self, BsplineError> {
        check_order(&kv, order)?;
        let expected = kv.dim_of_order(order);
        if coeffs.len() != expected {
            return Err(BsplineError::LengthMismatch { expected, found: coeffs.len() });
        }
        Ok(Self { kv, order, coeffs })
    }

    pub fn knots(&self) -> &KnotVector {
        &self.kv
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, x: f64, deriv: usize) -> Result<f64, BsplineError> {
        Ok(eval_basis(&self.kv, self.order, x, deriv)?.dot(&self.coeffs))
    }
}

/// Interpolates `f` at the Greville abscissae of the order-`q` basis on
/// `kv`, then confirms on a 200-point grid that `f` is reproduced to
/// `tol · max(1, ‖f‖_∞)`.
pub fn represent_in_with(kv: &KnotVector, q: usize, f: impl Fn(f64) -> f64, tol: f64) -> Result<Spline, BsplineError> {
    check_order(kv, q)?;
    let nodes = kv.greville(q);
    let dim = nodes.len();
    let mut a = DenseMatrix::zeros(dim, dim);
    for (i, &x) in nodes.iter().enumerate() {
        let w = eval_basis(kv, q, x, 0)?;
        for (j, v) in w.values.iter().enumerate() {
            a[(i, w.first + j)] = *v;
        }
    }
    let lu = a.lu().map_err(|_| BsplineError::SingularSystem)?;
    let rhs: Vec<f64> = nodes.iter().map(|&x| f(x)).collect();
    let spline = Spline::new(kv.clone(), q, lu.solve_vec(&rhs))?;

    let (lo, hi) = (kv.a(), kv.b());
    let mut residual: f64 = 0.0;
    let mut fmax: f64 = 1.0;
    for i in 0..200 {
        let x = lo + (hi - lo) * (i as f64 / 199.0);
        let fx = f(x);
        fmax = fmax.max(libm::fabs(fx));
        residual = residual.max(libm::fabs(fx - spline.eval(x, 0)?));
    }
    if !(residual <= tol * fmax) {
        return Err(BsplineError::ResidualTooLarge { residual, tol: tol * fmax });
    }
    Ok(spline)
}

/// [`represent_in_with`] at the default tolerance `1e-11`.
pub fn represent_in(kv: &KnotVector, q: usize, f: impl Fn(f64) -> f64) -> Result<Spline, BsplineError> {
    represent_in_with(kv, q, f, crate::linalg::Tolerances::default().represent_residual)
}
