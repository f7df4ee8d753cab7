use alloc::vec;
use alloc::vec::Vec;

use super::DenseMatrix;

/// Coordinate-format matrix.
///
/// Entries are kept sorted row-major with unique coordinates; duplicates
/// are summed when the matrix is assembled and exact zeros are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self { rows: n, cols: n, entries: (0..n).map(|i| (i, i, 1.0)).collect() }
    }

    /// Assembles from unordered triplets, summing duplicates.
    ///
    /// # Panics
    /// If a coordinate is out of range.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut t = triplets.to_vec();
        for &(i, j, _) in &t {
            assert!(i < rows && j < cols, "triplet ({i}, {j}) outside {rows}x{cols}");
        }
        t.sort_by_key(|a| (a.0, a.1));
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(t.len());
        for (i, j, v) in t {
            match entries.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => entries.push((i, j, v)),
            }
        }
        entries.retain(|e| e.2 != 0.0);
        Self { rows, cols, entries }
    }

    pub fn from_dense(d: &DenseMatrix) -> Self {
        let mut entries = Vec::new();
        for i in 0..d.rows() {
            for j in 0..d.cols() {
                let v = d[(i, j)];
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        Self { rows: d.rows(), cols: d.cols(), entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Sorted `(row, col, value)` triplets.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries.binary_search_by(|e| (e.0, e.1).cmp(&(i, j))).map_or(0.0, |k| self.entries[k].2)
    }

    /// Entries of row `i`.
    pub fn row(&self, i: usize) -> &[(usize, usize, f64)] {
        let lo = self.entries.partition_point(|e| e.0 < i);
        let hi = self.entries.partition_point(|e| e.0 <= i);
        &self.entries[lo..hi]
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |acc, e| acc.max(libm::fabs(e.2)))
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.entries.iter().map(|e| e.0.abs_diff(e.1)).max().unwrap_or(0)
    }

    pub fn transpose(&self) -> SparseMatrix {
        let t: Vec<_> = self.entries.iter().map(|&(i, j, v)| (j, i, v)).collect();
        SparseMatrix::from_triplets(self.cols, self.rows, &t)
    }

    pub fn scaled(&self, f: f64) -> SparseMatrix {
        let t: Vec<_> = self.entries.iter().map(|&(i, j, v)| (i, j, v * f)).collect();
        SparseMatrix::from_triplets(self.rows, self.cols, &t)
    }

    pub fn add(&self, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut t = self.entries.clone();
        t.extend_from_slice(&other.entries);
        SparseMatrix::from_triplets(self.rows, self.cols, &t)
    }

    pub fn matmul(&self, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut acc = vec![0.0; other.cols];
        let mut seen = vec![false; other.cols];
        let mut touched: Vec<usize> = Vec::new();
        let mut out = Vec::new();
        let mut start = 0;
        while start < self.entries.len() {
            let i = self.entries[start].0;
            let end = start + self.entries[start..].iter().take_while(|e| e.0 == i).count();
            for &(_, k, a) in &self.entries[start..end] {
                for &(_, j, b) in other.row(k) {
                    if !seen[j] {
                        seen[j] = true;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                out.push((i, j, acc[j]));
                acc[j] = 0.0;
                seen[j] = false;
            }
            touched.clear();
            start = end;
        }
        SparseMatrix::from_triplets(self.rows, other.cols, &out)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }

    /// `selfᵀ x`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for &(i, j, v) in &self.entries {
            y[j] += v * x[i];
        }
        y
    }

    pub fn mul_dense(&self, d: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, d.rows());
        let mut out = DenseMatrix::zeros(self.rows, d.cols());
        for &(i, k, v) in &self.entries {
            for j in 0..d.cols() {
                out[(i, j)] += v * d[(k, j)];
            }
        }
        out
    }

    /// `self · selfᵀ` as a dense matrix.
    pub fn mul_transpose_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in 0..=i {
                let (ri, rj) = (self.row(i), self.row(j));
                let (mut p, mut q, mut s) = (0, 0, 0.0);
                while p < ri.len() && q < rj.len() {
                    match ri[p].1.cmp(&rj[q].1) {
                        core::cmp::Ordering::Less => p += 1,
                        core::cmp::Ordering::Greater => q += 1,
                        core::cmp::Ordering::Equal => {
                            s += ri[p].2 * rj[q].2;
                            p += 1;
                            q += 1;
                        }
                    }
                }
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for &(i, j, v) in &self.entries {
            d[(i, j)] = v;
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let m = SparseMatrix::from_triplets(2, 2, &[(1, 0, 1.0), (0, 1, 2.0), (1, 0, 0.5), (0, 0, 1.0), (0, 0, -1.0)]);
        assert_eq!(m.entries(), &[(0, 1, 2.0), (1, 0, 1.5)]);
        assert_eq!(m.get(1, 0), 1.5);
        assert_eq!(m.get(1, 1), 0.0);
    }

    #[test]
    fn matmul_matches_dense() {
        let a = SparseMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, -1.0)]);
        let b = SparseMatrix::from_triplets(3, 2, &[(0, 1, 3.0), (1, 0, 4.0), (2, 0, 1.0), (2, 1, 1.0)]);
        let c = a.matmul(&b);
        let d = a.to_dense().matmul(&b.to_dense());
        assert_eq!(c.to_dense(), d);
        assert_eq!(a.mul_transpose_dense(), a.to_dense().matmul(&a.to_dense().transpose()));
        assert_eq!(a.transpose().to_dense(), a.to_dense().transpose());
    }

    #[test]
    fn bandwidth_of_tridiagonal() {
        let m = SparseMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (0, 1, 1.0), (2, 1, 1.0)]);
        assert_eq!(m.bandwidth(), 1);
    }
}
