//! Compressed-sparse-row matrices with the handful of products the
//! spectral code needs.

use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

/// A symmetric, non-negative pixel affinity matrix.
pub type SparseAffinity = SparseMatrix;

impl SparseMatrix {
    /// Builds from per-row `(col, value)` lists; duplicate columns are summed
    /// in list order and explicit zeros dropped.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n_rows = rows.len();
        let mut indptr = Vec::with_capacity(n_rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            // stable sort keeps list order among duplicates
            row.sort_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < row.len() {
                let c = row[i].0;
                assert!(c < n_cols, "column {c} out of range {n_cols}");
                let mut v = 0.0;
                while i < row.len() && row[i].0 == c {
                    v += row[i].1;
                    i += 1;
                }
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        SparseMatrix { n_rows, n_cols, indptr, indices, values }
    }

    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows = vec![Vec::new(); n_rows];
        for &(r, c, v) in triplets {
            rows[r].push((c, v));
        }
        SparseMatrix::from_rows(n_cols, rows)
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let rows = (0..m.nrows())
            .map(|r| (0..m.ncols()).map(|c| (c, m[(r, c)])).filter(|&(_, v)| v != 0.0).collect())
            .collect();
        SparseMatrix::from_rows(m.ncols(), rows)
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix::from_rows(n, (0..n).map(|i| vec![(i, 1.0)]).collect())
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate().take(self.n_rows) {
            *out = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    /// Keeps only the listed columns, renumbered in list order.
    pub fn select_columns(&self, keep: &[usize]) -> SparseMatrix {
        let mut new_index = vec![usize::MAX; self.n_cols];
        for (k, &c) in keep.iter().enumerate() {
            new_index[c] = k;
        }
        let rows = (0..self.n_rows)
            .map(|r| {
                self.row(r)
                    .filter(|&(c, _)| new_index[c] != usize::MAX)
                    .map(|(c, v)| (new_index[c], v))
                    .collect()
            })
            .collect();
        SparseMatrix::from_rows(keep.len(), rows)
    }

    /// Divides each row by its sum; rows summing to zero are left as-is.
    pub fn row_normalized(&self) -> SparseMatrix {
        let mut out = self.clone();
        for r in 0..self.n_rows {
            let span = self.indptr[r]..self.indptr[r + 1];
            let sum: f64 = self.values[span.clone()].iter().sum();
            let denom = if sum == 0.0 { 1.0 } else { sum };
            for v in &mut out.values[span] {
                *v /= denom;
            }
        }
        out
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut rows = vec![Vec::new(); self.n_cols];
        for (r, c, v) in self.triplets() {
            rows[c].push((r, v));
        }
        SparseMatrix::from_rows(self.n_rows, rows)
    }

    /// `self^T * other`. Each output entry is summed in ascending order of
    /// the shared index.
    pub fn transpose_mul(&self, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.n_rows, other.n_rows);
        let t = self.transpose();
        let mut acc = vec![0.0f64; other.n_cols];
        let mut touched = vec![false; other.n_cols];
        let mut cols: Vec<usize> = Vec::new();
        let mut indptr = Vec::with_capacity(t.n_rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for i in 0..t.n_rows {
            for (r, ci) in t.row(i) {
                for (j, bj) in other.row(r) {
                    if !touched[j] {
                        touched[j] = true;
                        cols.push(j);
                    }
                    acc[j] += ci * bj;
                }
            }
            cols.sort_unstable();
            for &j in &cols {
                if acc[j] != 0.0 {
                    indices.push(j);
                    values.push(acc[j]);
                }
                acc[j] = 0.0;
                touched[j] = false;
            }
            cols.clear();
            indptr.push(indices.len());
        }
        SparseMatrix { n_rows: t.n_rows, n_cols: other.n_cols, indptr, indices, values }
    }

    /// `(A + A^T) / 2` with bitwise-equal mirrored entries.
    pub fn symmetrized(&self) -> SparseMatrix {
        assert_eq!(self.n_rows, self.n_cols);
        let mut rows = vec![Vec::new(); self.n_rows];
        for (r, c, v) in self.triplets() {
            if r <= c {
                let avg = (v + self.get(c, r)) / 2.0;
                rows[r].push((c, avg));
                if r != c {
                    rows[c].push((r, avg));
                }
            } else if self.get(c, r) == 0.0 {
                let avg = v / 2.0;
                rows[r].push((c, avg));
                rows[c].push((r, avg));
            }
        }
        SparseMatrix::from_rows(self.n_cols, rows)
    }

    /// `self * x` for a column-major `n_cols x k` block.
    pub fn mul_block(&self, x: &[f64], k: usize) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols * k);
        let mut out = vec![0.0; self.n_rows * k];
        for j in 0..k {
            let col = &x[j * self.n_cols..(j + 1) * self.n_cols];
            self.matvec(col, &mut out[j * self.n_rows..(j + 1) * self.n_rows]);
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        self.n_rows == self.n_cols && self.triplets().all(|(r, c, v)| self.get(c, r) == v)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows, self.n_cols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SparseMatrix {
        SparseMatrix::from_triplets(3, 3, &[(0, 0, 2.0), (0, 2, 1.0), (1, 1, 3.0), (2, 0, 4.0)])
    }

    #[test]
    fn products_match_dense() {
        let a = small();
        let b = SparseMatrix::from_triplets(3, 2, &[(0, 1, 1.0), (1, 0, 2.0), (2, 0, 5.0)]);
        let want = a.to_dense().transpose() * b.to_dense();
        assert_eq!(a.transpose_mul(&b).to_dense(), want);
        assert_eq!(a.transpose().to_dense(), a.to_dense().transpose());
    }

    #[test]
    fn symmetrize_averages() {
        let s = small().symmetrized();
        assert!(s.is_symmetric());
        assert_eq!(s.get(0, 2), 2.5);
        assert_eq!(s.get(2, 0), 2.5);
        assert_eq!(s.get(1, 1), 3.0);
    }

    #[test]
    fn zero_rows_survive_normalization() {
        let m = SparseMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 2.0)]);
        let n = m.row_normalized();
        assert_eq!(n.get(0, 0), 0.5);
        assert_eq!(n.row(1).count(), 0);
    }

    #[test]
    fn select_columns_renumbers() {
        let s = small().select_columns(&[2, 0]);
        assert_eq!(s.n_cols, 2);
        assert_eq!(s.get(0, 0), 1.0);
        assert_eq!(s.get(0, 1), 2.0);
        assert_eq!(s.get(2, 1), 4.0);
    }
}
