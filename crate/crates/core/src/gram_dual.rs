//! The Gramian, the approximate-dual matrix `S` and the kernel
//! `K(x, y) = Φ_m(y) S Φ_m(x)ᵀ`.
//!
//! `S` is the unique symmetric matrix of bandwidth `m - 1` for which `K`
//! reproduces polynomials of degree `m - 1`. [`solve_s_unique`] computes it
//! from that characterisation; [`assemble_s`] builds it from the explicit
//! sum of derivative-chain terms `P_νᵀ U_ν P_ν`, whose per-term scale factors
//! are measured by [`calibrate_f_normalization`].

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::bspline::{binomial, elementary_symmetric, eval_basis, eval_basis_derivs, BsplineError, DerivativeMatrix};
use crate::knots::KnotVector;
use crate::linalg::{rule, BandedSymMatrix, DenseMatrix, LinalgError, SparseMatrix, Tolerances};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GramDualError {
    #[error("F_{nu} needs at least {} arguments, got {args}", 2 * .nu)]
    TooFewArguments { args: usize, nu: usize },
    #[error("reproduction system for S is singular: {0}")]
    SingularReproductionSystem(LinalgError),
    #[error("reproduction system for S is inconsistent (relative residual {residual:e})")]
    InconsistentReproductionSystem { residual: f64 },
    #[error("need {expected} scale factors, got {found}")]
    ScaleCount { expected: usize, found: usize },
    #[error("term {nu} is not a scalar multiple of the measured band (relative spread {spread:e})")]
    NotAScalarMismatch { nu: usize, spread: f64 },
    #[error("scale factor {nu} differs between reference knot vectors: {first} vs {second}")]
    CalibrationMismatch { nu: usize, first: f64, second: f64 },
    #[error("S is not positive definite: {0}")]
    NotPositiveDefinite(LinalgError),
    #[error(transparent)]
    Bspline(#[from] BsplineError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// `γ_{j,k} = ∫ N_{m,j} N_{m,k}`, integrated exactly with `m` Gauss points
/// per knot span.
pub fn gram_matrix(kv: &KnotVector) -> BandedSymMatrix {
    let m = kv.order();
    let n = kv.dim();
    let mut g = BandedSymMatrix::zeros(n, m - 1);
    let quad = rule(m).expect("order within the quadrature table");
    let t = kv.knots();
    for s in m - 1..n {
        if t[s + 1] <= t[s] {
            continue;
        }
        for (x, w) in quad.mapped(t[s], t[s + 1]) {
            let win = eval_basis(kv, m, x, 0).expect("quadrature node inside the span");
            for (i, vi) in win.values.iter().enumerate() {
                for (j, vj) in win.values[..=i].iter().enumerate() {
                    g.add(win.first + i, win.first + j, w * vi * vj);
                }
            }
        }
    }
    g
}

/// The symmetric polynomial `F_ν`: the sum over all sets of `ν` disjoint
/// unordered pairs `{i, j}` of `Π (x_i - x_j)²`. `F_0 = 1`.
pub fn f_nu(args: &[f64], nu: usize) -> Result<f64, GramDualError> {
    if args.len() < 2 * nu {
        return Err(GramDualError::TooFewArguments { args: args.len(), nu });
    }
    let mut idx: Vec<usize> = (0..args.len()).collect();
    Ok(matchings(args, &mut idx, nu))
}

fn matchings(x: &[f64], idx: &mut Vec<usize>, need: usize) -> f64 {
    if need == 0 {
        return 1.0;
    }
    if idx.len() < 2 * need {
        return 0.0;
    }
    let i = idx.remove(0);
    // pairs that avoid i
    let mut total = matchings(x, idx, need);
    for t in 0..idx.len() {
        let j = idx.remove(t);
        let d = x[i] - x[j];
        total += d * d * matchings(x, idx, need - 1);
        idx.insert(t, j);
    }
    idx.insert(0, i);
    total
}

/// `u_k^{(ν)} = F_ν(θ_{k+1}, …, θ_{k+m+ν-1}) / h_{m+ν,k}` for
/// `0 ≤ k < n - ν`.
pub fn u_coeffs(kv: &KnotVector, nu: usize) -> Vec<f64> {
    let m = kv.order();
    let t = kv.knots();
    (0..kv.dim() - nu)
        .map(|k| f_nu(&t[k + 1..k + m + nu], nu).expect("m + ν - 1 ≥ 2ν arguments") / kv.h(m + nu, k))
        .collect()
}

/// The chain `P_ν = D_{m+ν-1} ⋯ D_m` of size `(n-ν) × n`; `P_0 = I`.
pub fn derivative_chain(kv: &KnotVector, nu: usize) -> Result<SparseMatrix, BsplineError> {
    let m = kv.order();
    let mut p = SparseMatrix::identity(kv.dim());
    for j in m..m + nu {
        p = DerivativeMatrix::new(kv, j)?.to_sparse().matmul(&p);
    }
    Ok(p)
}

/// `Pᵀ diag(d) P` with exactly symmetric storage.
pub(crate) fn congruence(p: &SparseMatrix, d: &[f64], bw: usize) -> BandedSymMatrix {
    let mut out = BandedSymMatrix::zeros(p.cols(), bw);
    for (k, &dk) in d.iter().enumerate() {
        let row = p.row(k);
        for (a, &(_, i, pi)) in row.iter().enumerate() {
            for &(_, j, pj) in &row[..=a] {
                out.add(i, j, dk * pi * pj);
            }
        }
    }
    out
}

/// The unscaled terms `P_νᵀ diag(u^{(ν)}) P_ν` for `ν = 0..m`.
pub fn s_terms(kv: &KnotVector) -> Result<Vec<BandedSymMatrix>, BsplineError> {
    (0..kv.order()).map(|nu| Ok(congruence(&derivative_chain(kv, nu)?, &u_coeffs(kv, nu), nu))).collect()
}

/// `S = U_0 + Σ_{ν≥1} α_ν P_νᵀ U_ν P_ν` with one scale factor per `ν ≥ 1`.
pub fn assemble_s(kv: &KnotVector, alpha: &[f64]) -> Result<BandedSymMatrix, GramDualError> {
    let m = kv.order();
    if alpha.len() != m - 1 {
        return Err(GramDualError::ScaleCount { expected: m - 1, found: alpha.len() });
    }
    let terms = s_terms(kv)?;
    Ok(combine(&terms, alpha, m))
}

fn combine(terms: &[BandedSymMatrix], alpha: &[f64], m: usize) -> BandedSymMatrix {
    let mut s = BandedSymMatrix::zeros(terms[0].dim(), m - 1).add_matrix(&terms[0]);
    for (t, a) in terms[1..].iter().zip(alpha) {
        s = s.add_matrix(&t.scaled(*a));
    }
    s
}

/// The unique symmetric `S` of bandwidth `m - 1` with `S Γ c = c` for the
/// coefficient vector `c` of every polynomial of degree below `m`.
///
/// Equation `i` is written in polynomials centred and scaled around the
/// support of `N_{m,i}`, which keeps the system well conditioned for
/// clustered knots and high order; rows are normalised and the banded
/// least-squares problem is solved by Householder QR.
///
/// The condition of the global system grows rapidly with the dimension, so
/// each row of `S` is taken from the system on a short window of knots
/// around it: an entry `S_{i,j}` only depends on `θ_{i-m+1}, …, θ_{j+2m-1}`,
/// and the window keeps those knots and pads its ends to `m`-fold knots.
pub fn solve_s_unique(kv: &KnotVector) -> Result<BandedSymMatrix, GramDualError> {
    solve_s_unique_with(kv, &gram_matrix(kv), &Tolerances::default())
}

pub(crate) fn solve_s_unique_with(
    kv: &KnotVector,
    gram: &BandedSymMatrix,
    tol: &Tolerances,
) -> Result<BandedSymMatrix, GramDualError> {
    let m = kv.order();
    let n = kv.dim();
    if n <= WINDOW_ROWS + 2 * window_margin(m) {
        return solve_s_direct(kv, gram, tol);
    }
    let t = kv.knots();
    let len = t.len();
    let mut s = BandedSymMatrix::zeros(n, m - 1);
    let block = WINDOW_ROWS;
    let margin = window_margin(m);
    let mut r0 = 0;
    while r0 < n {
        let r1 = (r0 + block).min(n);
        // knot range [p, q) kept verbatim; the ends are padded to m-fold knots
        let mut p = r0.saturating_sub(margin);
        while p > 0 && t[p] == t[p + 1] {
            p -= 1;
        }
        let mut q = (r1 + margin + m).min(len);
        while q < len && t[q - 1] == t[q - 2] {
            q += 1;
        }
        let left_open = p < m;
        let right_open = q + m > len;
        let (p, q) = (if left_open { 0 } else { p }, if right_open { len } else { q });
        let mut knots = Vec::with_capacity(q - p + 2 * m);
        let offset = if left_open {
            knots.extend_from_slice(&t[..m]);
            0
        } else {
            knots.extend(std::iter::repeat_n(t[p], m));
            p + 1 - m
        };
        let mid_start = if left_open { m } else { p + 1 };
        let mid_end = if right_open { len - m } else { q - 1 };
        knots.extend_from_slice(&t[mid_start..mid_end]);
        if right_open {
            knots.extend_from_slice(&t[len - m..]);
        } else {
            knots.extend(std::iter::repeat_n(t[q - 1], m));
        }
        let window = KnotVector::new(knots, m).expect("window of a valid knot vector");
        let local = solve_s_direct(&window, &gram_matrix(&window), tol)?;
        for i in r0..r1 {
            for j in i.saturating_sub(m - 1)..=i {
                s.set(i, j, local.get(i - offset, j - offset));
            }
        }
        r0 = r1;
    }
    correct_globally(kv, gram, &s, tol)
}

// Rows of S taken from each window.
const WINDOW_ROWS: usize = 1;

// Basis functions kept on each side of a window's rows. An entry of S only
// depends on the knots within this reach.
fn window_margin(m: usize) -> usize {
    m - 1
}

// Reproduction equations over the lower band of S, one unknown per entry
// `(j + d, j)` at column `col[j * m + d]`.
struct ReproductionSystem {
    a: DenseMatrix,
    rhs: Vec<f64>,
    col: Vec<usize>,
}

impl ReproductionSystem {
    fn new(kv: &KnotVector, gram: &BandedSymMatrix) -> Self {
        let m = kv.order();
        let n = kv.dim();
        let t = kv.knots();
        let mut col = vec![usize::MAX; n * m];
        let mut unknowns = 0;
        for j in 0..n {
            for d in 0..m.min(n - j) {
                col[j * m + d] = unknowns;
                unknowns += 1;
            }
        }
        let rows = n * m;
        let mut a = DenseMatrix::zeros(rows, unknowns);
        let mut rhs = vec![0.0; rows];
        let reach = 2 * m - 2;
        let mut c = vec![0.0; n];
        let mut args = vec![0.0; m - 1];
        for i in 0..n {
            let center =
                if m == 1 { 0.5 * (t[i] + t[i + 1]) } else { t[i + 1..i + m].iter().sum::<f64>() / (m - 1) as f64 };
            let width = t[i + m] - t[i];
            let lo = i.saturating_sub(reach);
            let hi = (i + reach + 1).min(n);
            for p in 0..m {
                let binom = binomial(m - 1, p);
                for k in lo..hi {
                    for (a, &tk) in args.iter_mut().zip(&t[k + 1..k + m]) {
                        *a = (tk - center) / width;
                    }
                    c[k] = elementary_symmetric(&args, p) / binom;
                }
                let row = i * m + p;
                let mut norm2 = 0.0;
                let klo = i.saturating_sub(m - 1);
                let khi = (i + m).min(n);
                for k in klo..khi {
                    let glo = k.saturating_sub(m - 1);
                    let ghi = (k + m).min(n);
                    let gk: f64 = (glo..ghi).map(|l| gram.get(k, l) * c[l]).sum();
                    let (j, d) = (i.min(k), i.abs_diff(k));
                    a[(row, col[j * m + d])] += gk;
                }
                for k in klo..khi {
                    let (j, d) = (i.min(k), i.abs_diff(k));
                    let v = a[(row, col[j * m + d])];
                    norm2 += v * v;
                }
                let norm = libm::sqrt(norm2);
                for k in klo..khi {
                    let (j, d) = (i.min(k), i.abs_diff(k));
                    a[(row, col[j * m + d])] /= norm;
                }
                rhs[row] = c[i] / norm;
            }
        }
        Self { a, rhs, col }
    }

    fn unknowns(&self) -> usize {
        self.a.cols()
    }

    fn pack(&self, s: &BandedSymMatrix, m: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.unknowns()];
        for (slot, &c) in self.col.iter().enumerate() {
            if c != usize::MAX {
                x[c] = s.get(slot / m + slot % m, slot / m);
            }
        }
        x
    }

    fn unpack(&self, x: &[f64], n: usize, m: usize) -> BandedSymMatrix {
        let mut s = BandedSymMatrix::zeros(n, m - 1);
        for (slot, &c) in self.col.iter().enumerate() {
            if c != usize::MAX {
                s.set(slot / m + slot % m, slot / m, x[c]);
            }
        }
        s
    }

    fn relative_residual(&self, x: &[f64]) -> f64 {
        let ax = self.a.mul_vec(x);
        let r2: f64 = ax.iter().zip(&self.rhs).map(|(a, b)| (a - b) * (a - b)).sum();
        let b2: f64 = self.rhs.iter().map(|v| v * v).sum();
        libm::sqrt(r2 / b2)
    }
}

fn solve_s_direct(kv: &KnotVector, gram: &BandedSymMatrix, tol: &Tolerances) -> Result<BandedSymMatrix, GramDualError> {
    let sys = ReproductionSystem::new(kv, gram);
    let rhs_norm = libm::sqrt(sys.rhs.iter().map(|v| v * v).sum::<f64>());
    let (x, residual) = sys.a.clone().least_squares(&sys.rhs).map_err(GramDualError::SingularReproductionSystem)?;
    let relative = residual / rhs_norm;
    if !(relative <= tol.reproduction_system) {
        return Err(GramDualError::InconsistentReproductionSystem { residual: relative });
    }
    Ok(sys.unpack(&x, kv.dim(), kv.order()))
}

// Damping of the global correction, relative to the unit-norm equations.
const CORRECTION_DAMPING: f64 = 1e-6;

// Pulls an accurate but independently assembled `S` onto the reproduction
// equations. The global system is nearly singular for large `n`, so the
// correction is damped: it removes the residual along well-conditioned
// directions and leaves the rest of `S` alone. Unknowns are measured
// relative to the diagonal of `S`.
fn correct_globally(
    kv: &KnotVector,
    gram: &BandedSymMatrix,
    s: &BandedSymMatrix,
    tol: &Tolerances,
) -> Result<BandedSymMatrix, GramDualError> {
    let m = kv.order();
    let n = kv.dim();
    let sys = ReproductionSystem::new(kv, gram);
    let x0 = sys.pack(s, m);
    let ax = sys.a.mul_vec(&x0);
    let r: Vec<f64> = sys.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let unknowns = sys.unknowns();
    let mut scale = vec![0.0; unknowns];
    for (slot, &c) in sys.col.iter().enumerate() {
        if c != usize::MAX {
            let (i, j) = (slot / m + slot % m, slot / m);
            scale[c] = libm::sqrt(libm::fabs(s.get(i, i) * s.get(j, j)));
        }
    }
    // equations of row i, then the damping rows of the unknowns in column i
    let mut aug = DenseMatrix::zeros(n * m + unknowns, unknowns);
    let mut rhs = vec![0.0; n * m + unknowns];
    let mut row = 0;
    for i in 0..n {
        for p in 0..m {
            let src = i * m + p;
            for (c, sc) in scale.iter().enumerate() {
                let v = sys.a[(src, c)];
                if v != 0.0 {
                    aug[(row, c)] = v * sc;
                }
            }
            rhs[row] = r[src];
            row += 1;
        }
        for d in 0..m.min(n - i) {
            aug[(row, sys.col[i * m + d])] = CORRECTION_DAMPING;
            row += 1;
        }
    }
    let (y, _) = aug.least_squares(&rhs).map_err(GramDualError::SingularReproductionSystem)?;
    let x: Vec<f64> = x0.iter().zip(&y).zip(&scale).map(|((x, y), s)| x + y * s).collect();
    let relative = sys.relative_residual(&x);
    if !(relative <= tol.reproduction_system) {
        return Err(GramDualError::InconsistentReproductionSystem { residual: relative });
    }
    Ok(sys.unpack(&x, n, m))
}

/// Measures the scale factors `α_{m,ν}`, `ν = 1..m`, that make
/// [`assemble_s`] agree with [`solve_s_unique`].
///
/// Terms are peeled from the outermost band inwards: band `ν` of
/// `S - U_0 - Σ_{ν'>ν} α_{ν'} T_{ν'}` only receives a contribution from
/// `T_ν`, so its ratio to band `ν` of `T_ν` must be a single scalar. The
/// measurement runs on a uniform reference knot vector with `4m` interior
/// knots and is repeated on a geometrically graded one.
pub fn calibrate_f_normalization(m: usize) -> Result<Vec<f64>, GramDualError> {
    calibrate_f_normalization_with(m, &Tolerances::default())
}

pub fn calibrate_f_normalization_with(m: usize, tol: &Tolerances) -> Result<Vec<f64>, GramDualError> {
    assert!(m >= 1, "order must be positive");
    if m == 1 {
        return Ok(Vec::new());
    }
    let interior = 4 * m;
    let uniform: Vec<f64> = (1..=interior).map(|i| i as f64).collect();
    let mut graded = Vec::with_capacity(interior);
    let mut x = 0.0;
    let mut step = 1.0;
    for _ in 0..interior {
        x += step;
        graded.push(x);
        step *= 1.1;
    }
    let (first, weight) = measure_alpha(&reference_knots(m, &uniform, interior as f64 + 1.0), tol)?;
    let (second, _) = measure_alpha(&reference_knots(m, &graded, x + step), tol)?;
    for (nu, (a, b)) in first.iter().zip(&second).enumerate() {
        // compared by the size of the change they make to S on the first reference
        if libm::fabs(a - b) * weight[nu] > tol.calibration_cross_check * libm::fabs(*a) {
            return Err(GramDualError::CalibrationMismatch { nu: nu + 1, first: *a, second: *b });
        }
    }
    Ok(first)
}

fn reference_knots(m: usize, interior: &[f64], b: f64) -> KnotVector {
    let mut t = vec![0.0; m];
    t.extend_from_slice(interior);
    t.extend(vec![b; m]);
    KnotVector::new(t, m).expect("reference knots are valid")
}

/// Returns the scale factors together with the size of each scaled band
/// relative to the largest entry of `S`.
fn measure_alpha(kv: &KnotVector, tol: &Tolerances) -> Result<(Vec<f64>, Vec<f64>), GramDualError> {
    let m = kv.order();
    let n = kv.dim();
    let s = solve_s_unique_with(kv, &gram_matrix(kv), tol)?;
    let terms = s_terms(kv)?;
    let mut rest = s.add_matrix(&terms[0].scaled(-1.0));
    let mut alpha = vec![0.0; m - 1];
    let mut weight = vec![0.0; m - 1];
    let s_max = s.max_abs();
    for nu in (1..m).rev() {
        let r: Vec<f64> = (0..n - nu).map(|i| rest.get(i + nu, i)).collect();
        let t: Vec<f64> = (0..n - nu).map(|i| terms[nu].get(i + nu, i)).collect();
        let a = dot(&r, &t) / dot(&t, &t);
        let rmax = r.iter().fold(0.0_f64, |acc, v| acc.max(libm::fabs(*v)));
        let spread = r.iter().zip(&t).fold(0.0_f64, |acc, (x, y)| acc.max(libm::fabs(x - a * y))) / rmax;
        if !(spread <= tol.calibration_scalar) {
            return Err(GramDualError::NotAScalarMismatch { nu, spread });
        }
        rest = rest.add_matrix(&terms[nu].scaled(-a));
        alpha[nu - 1] = a;
        weight[nu - 1] = libm::fabs(a) * t.iter().fold(0.0_f64, |acc, v| acc.max(libm::fabs(*v))) / s_max;
    }
    let left = rest.max_abs() / s_max;
    if !(left <= tol.calibration_scalar) {
        return Err(GramDualError::NotAScalarMismatch { nu: 0, spread: left });
    }
    Ok((alpha, weight))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Approximate dual `Φ_m S` on a knot vector, with the Gramian and the
/// unscaled terms of the explicit representation kept alongside.
#[derive(Debug, Clone)]
pub struct ApproxDual {
    kv: KnotVector,
    gram: BandedSymMatrix,
    s: BandedSymMatrix,
    terms: Vec<BandedSymMatrix>,
}

impl ApproxDual {
    /// Builds `S` by [`solve_s_unique`] and checks it is positive definite.
    pub fn new(kv: &KnotVector) -> Result<Self, GramDualError> {
        Self::with_tolerances(kv, &Tolerances::default())
    }

    pub fn with_tolerances(kv: &KnotVector, tol: &Tolerances) -> Result<Self, GramDualError> {
        let gram = gram_matrix(kv);
        let s = solve_s_unique_with(kv, &gram, tol)?;
        Self::finish(kv, gram, s)
    }

    /// Builds `S` from the explicit term sum with the given scale factors.
    pub fn from_terms(kv: &KnotVector, alpha: &[f64]) -> Result<Self, GramDualError> {
        let s = assemble_s(kv, alpha)?;
        Self::finish(kv, gram_matrix(kv), s)
    }

    fn finish(kv: &KnotVector, gram: BandedSymMatrix, s: BandedSymMatrix) -> Result<Self, GramDualError> {
        s.cholesky().map_err(GramDualError::NotPositiveDefinite)?;
        let terms = s_terms(kv)?;
        Ok(Self { kv: kv.clone(), gram, s, terms })
    }

    pub fn knots(&self) -> &KnotVector {
        &self.kv
    }

    pub fn order(&self) -> usize {
        self.kv.order()
    }

    pub fn gram(&self) -> &BandedSymMatrix {
        &self.gram
    }

    pub fn s(&self) -> &BandedSymMatrix {
        &self.s
    }

    /// Unscaled terms `P_νᵀ U_ν P_ν`, `ν = 0..m`.
    pub fn terms(&self) -> &[BandedSymMatrix] {
        &self.terms
    }

    /// `K(x, y) = Φ_m(y) S Φ_m(x)ᵀ`.
    pub fn kernel(&self, x: f64, y: f64) -> Result<f64, BsplineError> {
        let m = self.order();
        let wx = eval_basis(&self.kv, m, x, 0)?;
        let wy = eval_basis(&self.kv, m, y, 0)?;
        Ok(bilinear(&wy.first, &wy.values, &wx.first, &wx.values, |i, j| self.s.get(i, j)))
    }
}

pub(crate) fn bilinear(fy: &usize, vy: &[f64], fx: &usize, vx: &[f64], entry: impl Fn(usize, usize) -> f64) -> f64 {
    let mut sum = 0.0;
    for (i, a) in vy.iter().enumerate() {
        for (j, b) in vx.iter().enumerate() {
            sum += a * entry(fy + i, fx + j) * b;
        }
    }
    sum
}

/// `Σ_ν α_ν Σ_k u_k^{(ν)} N^{(ν)}_{m+ν,k}(x) N^{(ν)}_{m+ν,k}(y)` with
/// `α_0 = 1`: the kernel written directly in derivatives of higher-order
/// B-splines.
pub fn kernel_expansion(kv: &KnotVector, alpha: &[f64], x: f64, y: f64) -> Result<f64, GramDualError> {
    let m = kv.order();
    if alpha.len() != m - 1 {
        return Err(GramDualError::ScaleCount { expected: m - 1, found: alpha.len() });
    }
    let mut sum = 0.0;
    for nu in 0..m {
        let scale = if nu == 0 { 1.0 } else { alpha[nu - 1] };
        let u = u_coeffs(kv, nu);
        let (fx, dx) = eval_basis_derivs(kv, m + nu, x, nu)?;
        let (fy, dy) = eval_basis_derivs(kv, m + nu, y, nu)?;
        let (dx, dy) = (&dx[nu], &dy[nu]);
        for (i, vx) in dx.iter().enumerate() {
            let k = fx + i;
            if k >= fy && k < fy + dy.len() {
                sum += scale * u[k] * vx * dy[k - fy];
            }
        }
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bspline::monomial_coeffs;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_knots(rng: &mut ChaCha8Rng, m: usize, spans: usize) -> KnotVector {
        random_knots_with(rng, m, spans, true)
    }

    fn random_knots_with(rng: &mut ChaCha8Rng, m: usize, spans: usize, repeated: bool) -> KnotVector {
        let mut t = vec![0.0; m];
        let mut x = 0.0;
        for _ in 0..spans - 1 {
            x += rng.gen_range(0.3..1.0);
            let mult = if repeated && m > 2 && rng.gen_bool(0.25) { rng.gen_range(1..m) } else { 1 };
            t.extend(std::iter::repeat_n(x, mult));
        }
        x += rng.gen_range(0.3..1.0);
        t.extend(vec![x; m]);
        KnotVector::new(t, m).unwrap()
    }

    fn factorial(k: usize) -> f64 {
        (1..=k).map(|i| i as f64).product()
    }

    // normalisation observed by calibration, confirmed with 50-digit arithmetic
    fn alpha_oracle(m: usize, nu: usize) -> f64 {
        factorial(m) * factorial(m - nu - 1) / (factorial(m + nu) * factorial(m + nu - 1))
    }

    fn rel_diff(a: &BandedSymMatrix, b: &BandedSymMatrix) -> f64 {
        a.add_matrix(&b.scaled(-1.0)).max_abs() / b.max_abs()
    }

    #[test]
    fn gram_linear_closed_form() {
        let kv = KnotVector::new(vec![0.0, 0.0, 1.0, 2.0, 2.0], 2).unwrap();
        let g = gram_matrix(&kv);
        assert_abs_diff_eq!(g.get(0, 0), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.get(1, 1), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.get(2, 2), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.get(0, 1), 1.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.get(1, 2), 1.0 / 6.0, epsilon = 1e-15);
        assert_eq!(g.get(0, 2), 0.0);
        let x = crate::linalg::cholesky_banded_solve(&g, &g.mul_vec(&[1.0; 3])).unwrap();
        for v in x {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn gram_row_sums_are_integrals() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for m in 1..=6 {
            let kv = random_knots(&mut rng, m, 9);
            let g = gram_matrix(&kv);
            assert!(g.realized_bandwidth() < m);
            let sums = g.mul_vec(&vec![1.0; kv.dim()]);
            for (k, s) in sums.iter().enumerate() {
                assert_abs_diff_eq!(*s, kv.h(m, k), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn f_nu_examples() {
        assert_eq!(f_nu(&[3.0, -1.0], 0).unwrap(), 1.0);
        assert_eq!(f_nu(&[], 0).unwrap(), 1.0);
        assert_eq!(f_nu(&[0.0, 1.0], 1).unwrap(), 1.0);
        assert_eq!(f_nu(&[0.0, 1.0, 2.0], 1).unwrap(), 6.0);
        // one perfect matching pair set for two points each: (0,1)(2,3), (0,2)(1,3), (0,3)(1,2)
        assert_eq!(f_nu(&[0.0, 1.0, 2.0, 3.0], 2).unwrap(), 1.0 + 4.0 * 4.0 + 9.0);
        assert!(matches!(f_nu(&[0.0, 1.0, 2.0], 2), Err(GramDualError::TooFewArguments { .. })));
    }

    #[test]
    fn f_nu_matches_ordered_enumeration() {
        // (2^ν ν!)⁻¹ Σ over ordered tuples of distinct indices
        fn ordered(x: &[f64], nu: usize, used: &mut Vec<bool>) -> f64 {
            if nu == 0 {
                return 1.0;
            }
            let mut s = 0.0;
            for i in 0..x.len() {
                for j in 0..x.len() {
                    if i == j || used[i] || used[j] {
                        continue;
                    }
                    used[i] = true;
                    used[j] = true;
                    s += (x[i] - x[j]) * (x[i] - x[j]) * ordered(x, nu - 1, used);
                    used[i] = false;
                    used[j] = false;
                }
            }
            s
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for r in 2..=7 {
            let x: Vec<f64> = (0..r).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for nu in 0..=r / 2 {
                let norm = libm::pow(2.0, nu as f64) * factorial(nu);
                let expected = ordered(&x, nu, &mut vec![false; r]) / norm;
                let got = f_nu(&x, nu).unwrap();
                assert!((got - expected).abs() <= 1e-12 * expected.abs().max(1.0));
                let shifted: Vec<f64> = x.iter().map(|v| v + 0.37).collect();
                assert!((f_nu(&shifted, nu).unwrap() - got).abs() <= 1e-12 * got.abs().max(1.0));
            }
        }
    }

    #[test]
    fn piecewise_constant_dual() {
        let kv = KnotVector::new(vec![0.0, 0.5, 1.25, 2.0], 1).unwrap();
        let s = solve_s_unique(&kv).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(s.get(k, k), 1.0 / (kv.knot(k + 1) - kv.knot(k)), epsilon = 1e-14);
        }
        let assembled = assemble_s(&kv, &[]).unwrap();
        assert!(rel_diff(&assembled, &s) < 1e-14);
        assert!(calibrate_f_normalization(1).unwrap().is_empty());
    }

    #[test]
    fn linear_dual_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let kv = random_knots(&mut rng, 2, 8);
            let t = kv.knots();
            let n = kv.dim();
            let s = solve_s_unique(&kv).unwrap();
            let alpha =
                |j: usize| if j == 0 || j == n { 0.0 } else { (t[j + 1] - t[j]).powi(2) / (t[j + 2] - t[j - 1]) };
            for j in 0..n {
                let d = t[j + 2] - t[j];
                let sjj = 2.0 / d + 2.0 / (d * d) * (alpha(j) + alpha(j + 1));
                assert!((s.get(j, j) - sjj).abs() <= 1e-11 * sjj.abs());
                if j + 1 < n {
                    let beta = -2.0 * (t[j + 2] - t[j + 1]).powi(2)
                        / ((t[j + 2] - t[j]) * (t[j + 3] - t[j]) * (t[j + 3] - t[j + 1]));
                    assert!((s.get(j, j + 1) - beta).abs() <= 1e-11 * s.max_abs());
                }
            }
        }
    }

    #[test]
    fn diagonal_term_for_linear_splines() {
        let kv = KnotVector::new(vec![0.0, 0.0, 0.4, 1.0, 1.7, 1.7], 2).unwrap();
        let terms = s_terms(&kv).unwrap();
        for j in 0..kv.dim() {
            assert_abs_diff_eq!(terms[0].get(j, j), 2.0 / (kv.knot(j + 2) - kv.knot(j)), epsilon = 1e-14);
        }
    }

    #[test]
    fn calibration_recovers_constants() {
        let alpha = calibrate_f_normalization(2).unwrap();
        assert!((alpha[0] - 1.0 / 6.0).abs() < 1e-12);
        for m in 3..=6 {
            let alpha = calibrate_f_normalization(m).unwrap();
            for nu in 1..m {
                let expected = alpha_oracle(m, nu);
                assert!(
                    (alpha[nu - 1] - expected).abs() <= 1e-9 * expected,
                    "m={m} nu={nu} {} vs {expected}",
                    alpha[nu - 1]
                );
            }
        }
    }

    #[test]
    fn assembled_matches_unique() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for m in 2..=6 {
            let alpha: Vec<f64> = (1..m).map(|nu| alpha_oracle(m, nu)).collect();
            for _ in 0..5 {
                let kv = random_knots_with(&mut rng, m, 3 * m, false);
                let s = solve_s_unique(&kv).unwrap();
                let t = assemble_s(&kv, &alpha).unwrap();
                assert_eq!(t.bandwidth(), m - 1);
                assert!(rel_diff(&t, &s) < 1e-9, "m={m} diff={}", rel_diff(&t, &s));
                assert!(s.cholesky().is_ok());
            }
        }
    }

    // With knots of high multiplicity the reproduction system is too poorly
    // conditioned for an entrywise comparison, so both constructions are
    // judged by how well they reproduce polynomials instead.
    #[test]
    fn assembled_reproduces_on_repeated_knots() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for m in 3..=6 {
            let alpha: Vec<f64> = (1..m).map(|nu| alpha_oracle(m, nu)).collect();
            for _ in 0..5 {
                let kv = random_knots(&mut rng, m, 3 * m);
                let g = gram_matrix(&kv);
                let assembled = assemble_s(&kv, &alpha).unwrap();
                let unique = solve_s_unique(&kv).unwrap();
                for p in 0..m {
                    let c = monomial_coeffs(&kv, p, 0.0, kv.b());
                    for s in [&assembled, &unique] {
                        let back = s.mul_vec(&g.mul_vec(&c));
                        for (a, b) in back.iter().zip(&c) {
                            assert!((a - b).abs() <= 1e-10, "m={m} p={p}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn polynomial_reproduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for m in 1..=6 {
            for _ in 0..3 {
                let kv = random_knots(&mut rng, m, 2 * m + 3);
                let ad = ApproxDual::new(&kv).unwrap();
                for p in 0..m {
                    let c = monomial_coeffs(&kv, p, 0.0, kv.b());
                    let back = ad.s().mul_vec(&ad.gram().mul_vec(&c));
                    for (a, b) in back.iter().zip(&c) {
                        assert!((a - b).abs() <= 1e-10, "m={m} p={p}");
                    }
                }
            }
        }
    }

    #[test]
    fn kernel_symmetry_and_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for m in 2..=5 {
            let kv = random_knots(&mut rng, m, 4 * m);
            let ad = ApproxDual::new(&kv).unwrap();
            let t = kv.knots();
            let n = kv.dim();
            for _ in 0..30 {
                let x = rng.gen_range(kv.a()..kv.b());
                let y = rng.gen_range(kv.a()..kv.b());
                let kxy = ad.kernel(x, y).unwrap();
                assert!((kxy - ad.kernel(y, x).unwrap()).abs() <= 1e-12 * kxy.abs().max(1.0));
                let k = kv.span(x).unwrap();
                let below = t[k.saturating_sub(2 * m - 2)];
                let above = t[(k + 2 * m - 1).min(n + m - 1)];
                if y <= below || y >= above {
                    assert_eq!(kxy, 0.0);
                }
            }
        }
    }

    #[test]
    fn expansion_matches_banded_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for m in 2..=6 {
            let alpha: Vec<f64> = (1..m).map(|nu| alpha_oracle(m, nu)).collect();
            let kv = random_knots(&mut rng, m, 2 * m + 2);
            let ad = ApproxDual::new(&kv).unwrap();
            for _ in 0..20 {
                let x = rng.gen_range(kv.a()..kv.b());
                let y = x + rng.gen_range(-1.0..1.0);
                let y = y.clamp(kv.a(), kv.b());
                let direct = ad.kernel(x, y).unwrap();
                let expanded = kernel_expansion(&kv, &alpha, x, y).unwrap();
                assert!((direct - expanded).abs() <= 1e-10 * ad.s().max_abs(), "m={m}");
            }
        }
    }

    fn max_rel_diff(a: &BandedSymMatrix, b: &BandedSymMatrix) -> f64 {
        let n = a.dim();
        let bw = a.bandwidth();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i.saturating_sub(bw)..=i {
                worst = worst.max((a.get(i, j) - b.get(i, j)).abs() / b.get(i, i).abs());
            }
        }
        worst
    }

    #[test]
    fn windowed_rows_match_the_term_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for m in 2..=6 {
            let alpha: Vec<f64> = (1..m).map(|nu| alpha_oracle(m, nu)).collect();
            for _ in 0..5 {
                let kv = random_knots_with(&mut rng, m, 4 * m, true);
                let exact = assemble_s(&kv, &alpha).unwrap();
                let diff = max_rel_diff(&solve_s_unique(&kv).unwrap(), &exact);
                let bound = match m {
                    2..=4 => 1e-10,
                    5 => 1e-8,
                    _ => 1e-7,
                };
                assert!(diff <= bound, "m={m} {diff:e}");
            }
        }
    }

    #[test]
    fn large_knot_vectors_keep_the_term_formula() {
        for m in 3..=6 {
            let alpha: Vec<f64> = (1..m).map(|nu| alpha_oracle(m, nu)).collect();
            for mult in [1, m - 1] {
                let mut t = vec![0.0; m];
                for i in 1..128 {
                    let x = i as f64 / 128.0;
                    t.extend(vec![x; if i == 64 { mult } else { 1 }]);
                }
                t.extend(vec![1.0; m]);
                let kv = KnotVector::new(t, m).unwrap();
                let diff = max_rel_diff(&solve_s_unique(&kv).unwrap(), &assemble_s(&kv, &alpha).unwrap());
                assert!(diff <= 1e-8, "m={m} mult={mult} {diff:e}");
            }
        }
    }
}
