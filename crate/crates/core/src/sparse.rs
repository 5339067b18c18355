//! Compressed sparse row matrix with the handful of operations the library
//! needs: matrix-vector products (plain and transposed), repeated powers
//! applied to vectors, and a dense fallback for small instances.

use nalgebra::DMatrix;

/// Largest dimension for which `to_dense` is permitted.
pub const DENSE_LIMIT: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from (row, col, value) triplets. Duplicate entries are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, _, _) in triplets {
            assert!(r < nrows, "row index out of bounds");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut indices = vec![0usize; triplets.len()];
        let mut values = vec![0.0; triplets.len()];
        let mut cursor = counts.clone();
        for &(r, c, v) in triplets {
            assert!(c < ncols, "col index out of bounds");
            let k = cursor[r];
            indices[k] = c;
            values[k] = v;
            cursor[r] += 1;
        }
        // sort each row by column and merge duplicates
        let mut out_indptr = vec![0usize; nrows + 1];
        let mut out_indices = Vec::with_capacity(triplets.len());
        let mut out_values = Vec::with_capacity(triplets.len());
        for r in 0..nrows {
            let lo = counts[r];
            let hi = counts[r + 1];
            let mut row: Vec<(usize, f64)> = indices[lo..hi]
                .iter()
                .copied()
                .zip(values[lo..hi].iter().copied())
                .collect();
            row.sort_unstable_by_key(|&(c, _)| c);
            for (c, v) in row {
                if let Some(last) = out_indices.last() {
                    if *last == c && out_indptr[r] < out_indices.len() {
                        let n = out_values.len();
                        out_values[n - 1] += v;
                        continue;
                    }
                }
                out_indices.push(c);
                out_values.push(v);
            }
            out_indptr[r + 1] = out_indices.len();
        }
        CsrMatrix {
            nrows,
            ncols,
            indptr: out_indptr,
            indices: out_indices,
            values: out_values,
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let lo = self.indptr[r];
        let hi = self.indptr[r + 1];
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    /// Iterates over all stored entries as (row, col, value).
    pub fn iter_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter()
                .zip(vals.iter())
                .map(move |(&c, &v)| (r, c, v))
        })
    }

    /// y = self * x
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        let mut y = vec![0.0; self.nrows];
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            let mut acc = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                acc += v * x[c];
            }
            y[r] = acc;
        }
        y
    }

    /// y = self^T * x
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows, "transposed matvec dimension mismatch");
        let mut y = vec![0.0; self.ncols];
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                y[c] += v * x[r];
            }
        }
        y
    }

    /// self^power * x by repeated products; power 0 returns a copy of x.
    pub fn pow_matvec(&self, x: &[f64], power: usize) -> Vec<f64> {
        let mut y = x.to_vec();
        for _ in 0..power {
            y = self.matvec(&y);
        }
        y
    }

    /// (self^T)^power * x; equals row i of self^power when x = e_i.
    pub fn pow_matvec_transpose(&self, x: &[f64], power: usize) -> Vec<f64> {
        let mut y = x.to_vec();
        for _ in 0..power {
            y = self.matvec_transpose(&y);
        }
        y
    }

    /// Dense n x m matrix product: self * m, column by column.
    pub fn matmul_dense(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(m.nrows(), self.ncols, "matmul dimension mismatch");
        let mut out = DMatrix::zeros(self.nrows, m.ncols());
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for j in 0..m.ncols() {
                let mut acc = 0.0;
                for (&c, &v) in cols.iter().zip(vals) {
                    acc += v * m[(c, j)];
                }
                out[(r, j)] = acc;
            }
        }
        out
    }

    /// Dense product with the transpose: self^T * m.
    pub fn matmul_dense_transpose(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(m.nrows(), self.nrows, "matmul dimension mismatch");
        let mut out = DMatrix::zeros(self.ncols, m.ncols());
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                for j in 0..m.ncols() {
                    out[(c, j)] += v * m[(r, j)];
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        assert!(
            self.nrows.max(self.ncols) <= DENSE_LIMIT,
            "dense fallback limited to {DENSE_LIMIT}"
        );
        let mut out = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter_entries() {
            out[(r, c)] += v;
        }
        out
    }

    /// Exact symmetry of paired entries.
    pub fn is_symmetric(&self) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        for (r, c, v) in self.iter_entries() {
            if self.get(c, r) != v {
                return false;
            }
        }
        true
    }

    /// Entry lookup by binary search within the row.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Returns a copy with `diag[i]` added to entry (i, i).
    pub fn add_diagonal(&self, diag: &[f64]) -> CsrMatrix {
        assert_eq!(self.nrows, self.ncols);
        assert_eq!(diag.len(), self.nrows);
        let mut triplets: Vec<(usize, usize, f64)> = self.iter_entries().collect();
        for (i, &d) in diag.iter().enumerate() {
            if d != 0.0 {
                triplets.push((i, i, d));
            }
        }
        CsrMatrix::from_triplets(self.nrows, self.ncols, &triplets)
    }

    /// Row sums (self * 1).
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|r| self.row(r).1.iter().sum())
            .collect()
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CsrMatrix {
        // [[1, 2, 0], [0, 0, 3], [4, 0, 5]]
        CsrMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 1.0), (0, 1, 2.0), (1, 2, 3.0), (2, 0, 4.0), (2, 2, 5.0)],
        )
    }

    #[test]
    fn matvec_matches_dense() {
        let m = sample();
        let x = [1.0, -1.0, 2.0];
        assert_eq!(m.matvec(&x), vec![-1.0, 6.0, 14.0]);
        assert_eq!(m.matvec_transpose(&x), vec![9.0, 2.0, 7.0]);
    }

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, 2.5)]);
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), 3.5);
    }

    #[test]
    fn power_zero_is_identity() {
        let m = sample();
        let x = [3.0, 1.0, 4.0];
        assert_eq!(m.pow_matvec(&x, 0), x.to_vec());
    }

    #[test]
    fn symmetric_detection() {
        let sym = CsrMatrix::from_triplets(2, 2, &[(0, 1, 2.0), (1, 0, 2.0)]);
        assert!(sym.is_symmetric());
        assert!(!sample().is_symmetric());
    }
}
