use alloc::vec;
use alloc::vec::Vec;

use super::{DenseMatrix, LinalgError, SparseMatrix};

/// Symmetric matrix with `bw` nonzero sub-diagonals.
///
/// Only the lower band is stored: entry `(i, i - d)` for `0 <= d <= bw`
/// lives at `data[i * (bw + 1) + d]`. Slots that would fall left of column
/// zero are kept as zeros so rows stay aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSymMatrix {
    dim: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSymMatrix {
    pub fn zeros(dim: usize, bw: usize) -> Self {
        Self { dim, bw, data: vec![0.0; dim * (bw + 1)] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, 0);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Storage bandwidth.
    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        (d <= self.bw && hi < self.dim).then(|| hi * (self.bw + 1) + d)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Sets both `(i, j)` and `(j, i)`.
    ///
    /// # Panics
    /// If `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).expect("entry outside the band");
        self.data[s] = v;
    }

    /// Adds to both `(i, j)` and `(j, i)` (a single stored slot).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).expect("entry outside the band");
        self.data[s] += v;
    }

    /// Largest `|i - j|` carrying a nonzero value.
    pub fn realized_bandwidth(&self) -> usize {
        let mut best = 0;
        for i in 0..self.dim {
            for d in 0..=self.bw.min(i) {
                if self.data[i * (self.bw + 1) + d] != 0.0 {
                    best = best.max(d);
                }
            }
        }
        best
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        let mut y = vec![0.0; self.dim];
        for i in 0..self.dim {
            let row = &self.data[i * (self.bw + 1)..(i + 1) * (self.bw + 1)];
            y[i] += row[0] * x[i];
            for d in 1..=self.bw.min(i) {
                let v = row[d];
                y[i] += v * x[i - d];
                y[i - d] += v * x[i];
            }
        }
        y
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(libm::fabs(*v)))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { dim: self.dim, bw: self.bw, data: self.data.iter().map(|v| v * factor).collect() }
    }

    /// Sum of two matrices of equal dimension; bandwidth is the larger one.
    pub fn add_matrix(&self, other: &BandedSymMatrix) -> BandedSymMatrix {
        assert_eq!(self.dim, other.dim);
        let bw = self.bw.max(other.bw);
        let mut out = BandedSymMatrix::zeros(self.dim, bw);
        for i in 0..self.dim {
            for d in 0..=bw.min(i) {
                out.set(i, i - d, self.get(i, i - d) + other.get(i, i - d));
            }
        }
        out
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        let mut trip = Vec::new();
        for i in 0..self.dim {
            let lo = i.saturating_sub(self.bw);
            let hi = (i + self.bw + 1).min(self.dim);
            for j in lo..hi {
                let v = self.get(i, j);
                if v != 0.0 {
                    trip.push((i, j, v));
                }
            }
        }
        SparseMatrix::from_triplets(self.dim, self.dim, &trip)
    }

    /// Copies the band of a square sparse matrix, which must be symmetric
    /// within `tol` and vanish outside `bw`.
    pub fn from_sparse(m: &SparseMatrix, bw: usize, tol: f64) -> Option<Self> {
        if m.rows() != m.cols() {
            return None;
        }
        let mut out = Self::zeros(m.rows(), bw);
        let scale = m.max_abs().max(f64::MIN_POSITIVE);
        for &(i, j, v) in m.entries() {
            if i.abs_diff(j) > bw {
                if libm::fabs(v) > tol * scale {
                    return None;
                }
                continue;
            }
            if i >= j {
                out.set(i, j, v);
            } else if libm::fabs(m.get(j, i) - v) > tol * scale {
                return None;
            }
        }
        Some(out)
    }

    /// Banded Cholesky factorisation `M = L Lᵀ`.
    pub fn cholesky(&self) -> Result<BandedCholesky, LinalgError> {
        let (n, bw) = (self.dim, self.bw);
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                // l(i, j) lives at i * w + (i - j)
                let mut s = self.get(i, j);
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    s -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(LinalgError::NotPositiveDefinite { row: i, pivot: s });
                    }
                    l[i * w] = libm::sqrt(s);
                } else {
                    l[i * w + (i - j)] = s / l[j * w];
                }
            }
        }
        Ok(BandedCholesky { dim: n, bw, l })
    }
}

/// Lower-triangular banded Cholesky factor, stored like [`BandedSymMatrix`].
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    dim: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    pub fn dim(&self) -> usize {
        self.dim
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        if j > i || i - j > self.bw {
            0.0
        } else {
            self.l[i * (self.bw + 1) + (i - j)]
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.dim);
        let n = self.dim;
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(self.bw)..i {
                s -= self.at(i, k) * y[k];
            }
            y[i] = s / self.at(i, i);
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + self.bw + 1).min(n) {
                s -= self.at(k, i) * y[k];
            }
            y[i] = s / self.at(i, i);
        }
        y
    }

    /// `L Lᵀ` as a dense matrix.
    pub fn reconstruct(&self) -> DenseMatrix {
        let n = self.dim;
        DenseMatrix::from_fn(n, n, |i, j| {
            let lo = i.max(j).saturating_sub(self.bw);
            (lo..=i.min(j)).map(|k| self.at(i, k) * self.at(j, k)).sum()
        })
    }

    /// Product of the pivots squared, i.e. the determinant of `L Lᵀ`.
    pub fn det(&self) -> f64 {
        (0..self.dim).map(|i| self.at(i, i) * self.at(i, i)).product()
    }
}

/// Solves `M x = rhs` for banded symmetric positive-definite `M`.
pub fn cholesky_banded_solve(m: &BandedSymMatrix, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
    Ok(m.cholesky()?.solve(rhs))
}
