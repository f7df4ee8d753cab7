use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use super::LinalgError;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from equally long rows.
    ///
    /// # Panics
    /// If the rows have different lengths.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self { rows: rows.len(), cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len());
        (0..self.rows).map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(libm::fabs(*v)))
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.cols).map(|j| (0..self.rows).map(|i| libm::fabs(self[(i, j)])).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        DenseMatrix { rows: self.rows, cols: self.cols, data }
    }

    /// Copies the listed columns into a new matrix.
    pub fn select_columns(&self, columns: &[usize]) -> DenseMatrix {
        DenseMatrix::from_fn(self.rows, columns.len(), |i, j| self[(i, columns[j])])
    }

    /// LU factorisation with partial pivoting.
    pub fn lu(&self) -> Result<Lu, LinalgError> {
        assert_eq!(self.rows, self.cols, "LU needs a square matrix");
        let n = self.rows;
        let mut lu = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let scale = self.max_abs();
        for k in 0..n {
            let (p, pivot) =
                (k..n)
                    .map(|i| (i, libm::fabs(lu[(i, k)])))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= scale * 1e-14 || pivot == 0.0 {
                return Err(LinalgError::Singular { column: k, pivot });
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        let v = lu[(k, j)];
                        lu[(i, j)] -= f * v;
                    }
                }
            }
        }
        Ok(Lu { lu, perm, sign })
    }

    /// Solves `self · X = rhs` for symmetric positive-definite `self`.
    pub fn cholesky_solve(&self, rhs: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        assert_eq!(self.rows, self.cols);
        assert_eq!(self.rows, rhs.rows);
        let n = self.rows;
        let mut l = DenseMatrix::zeros(n, n);
        let scale = (0..n).fold(0.0_f64, |acc, i| acc.max(self[(i, i)]));
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= scale * 1e-13 || !d.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { row: j, pivot: d });
            }
            let d = libm::sqrt(d);
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        let mut x = rhs.clone();
        for c in 0..x.cols {
            for i in 0..n {
                let mut s = x[(i, c)];
                for k in 0..i {
                    s -= l[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s / l[(i, i)];
            }
            for i in (0..n).rev() {
                let mut s = x[(i, c)];
                for k in i + 1..n {
                    s -= l[(k, i)] * x[(k, c)];
                }
                x[(i, c)] = s / l[(i, i)];
            }
        }
        Ok(x)
    }

    /// Least-squares solution of an overdetermined system by Householder QR.
    ///
    /// Exploits a staircase sparsity pattern: reflections only touch the rows
    /// below the diagonal that hold nonzeros in the current column, and only
    /// the columns those rows reach. Sorting equations by their leftmost
    /// unknown makes this close to banded cost.
    ///
    /// Returns the solution and the Euclidean norm of the residual.
    pub fn least_squares(mut self, rhs: &[f64]) -> Result<(Vec<f64>, f64), LinalgError> {
        let (m, n) = (self.rows, self.cols);
        assert!(m >= n, "least_squares needs at least as many rows as columns");
        assert_eq!(rhs.len(), m);
        let mut b = rhs.to_vec();
        let mut row_last: Vec<usize> =
            (0..m).map(|i| self.row(i).iter().rposition(|v| *v != 0.0).unwrap_or(0)).collect();
        let scale = self.max_abs();
        let mut v = vec![0.0; m];
        for c in 0..n {
            let last = (c..m).rev().find(|&i| self[(i, c)] != 0.0).unwrap_or(c);
            let col_end = (c..=last).map(|i| row_last[i]).max().unwrap_or(c).max(c);
            for r in row_last.iter_mut().take(last + 1).skip(c) {
                *r = col_end;
            }
            let norm = libm::sqrt((c..=last).map(|i| self[(i, c)] * self[(i, c)]).sum::<f64>());
            if norm <= scale * 1e-13 {
                return Err(LinalgError::RankDeficient { index: c, pivot: norm });
            }
            let alpha = if self[(c, c)] > 0.0 { -norm } else { norm };
            for i in c..=last {
                v[i] = self[(i, c)];
            }
            v[c] -= alpha;
            let vnorm2: f64 = (c..=last).map(|i| v[i] * v[i]).sum();
            self[(c, c)] = alpha;
            for i in c + 1..=last {
                self[(i, c)] = 0.0;
            }
            if vnorm2 == 0.0 {
                continue;
            }
            for j in c + 1..=col_end {
                let dot: f64 = (c..=last).map(|i| v[i] * self[(i, j)]).sum();
                let f = 2.0 * dot / vnorm2;
                if f != 0.0 {
                    for i in c..=last {
                        self[(i, j)] -= f * v[i];
                    }
                }
            }
            let dot: f64 = (c..=last).map(|i| v[i] * b[i]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in c..=last {
                b[i] -= f * v[i];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n.min(row_last[i] + 1) {
                s -= self[(i, j)] * x[j];
            }
            x[i] = s / self[(i, i)];
        }
        let residual = libm::sqrt(b[n..].iter().map(|v| v * v).sum::<f64>());
        Ok((x, residual))
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Packed LU factors with row permutation.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: DenseMatrix,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                x[i] -= self.lu[(i, k)] * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                x[i] -= self.lu[(i, k)] * x[k];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    pub fn solve(&self, b: &DenseMatrix) -> DenseMatrix {
        let n = self.lu.rows;
        let mut out = DenseMatrix::zeros(n, b.cols());
        let mut col = vec![0.0; n];
        for c in 0..b.cols() {
            for i in 0..n {
                col[i] = b[(i, c)];
            }
            let x = self.solve_vec(&col);
            for i in 0..n {
                out[(i, c)] = x[i];
            }
        }
        out
    }

    pub fn det(&self) -> f64 {
        (0..self.lu.rows).fold(self.sign, |acc, i| acc * self.lu[(i, i)])
    }
}
