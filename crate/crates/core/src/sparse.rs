//! Compressed sparse row storage for square graph matrices.

use ndarray::{Array1, Array2, ArrayView2};

/// A square sparse matrix in CSR layout with sorted column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from coordinate triplets. Duplicate coordinates are summed and
    /// explicit zeros are dropped.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            debug_assert!(r < n && c < n);
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|t| t.2 != 0.0);

        let mut row_ptr = vec![0usize; n + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = merged.iter().map(|t| t.1).collect();
        let values = merged.iter().map(|t| t.2).collect();
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Nonzero `(col, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    /// Elementwise map over stored entries; entries mapped to zero are kept.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self + scale * other`.
    pub fn add_scaled(&self, other: &CsrMatrix, scale: f64) -> Self {
        assert_eq!(self.n, other.n);
        let mut triplets = self.triplets();
        triplets.extend(other.triplets().into_iter().map(|(r, c, v)| (r, c, scale * v)));
        Self::from_triplets(self.n, triplets)
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .collect()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                out[[i, j]] = v;
            }
        }
        out
    }

    /// Dense submatrix `M[idx, idx]`.
    pub fn submatrix(&self, idx: &[usize]) -> Array2<f64> {
        let mut position = vec![usize::MAX; self.n];
        for (p, &i) in idx.iter().enumerate() {
            position[i] = p;
        }
        let mut out = Array2::zeros((idx.len(), idx.len()));
        for (p, &i) in idx.iter().enumerate() {
            for (j, v) in self.row(i) {
                let q = position[j];
                if q != usize::MAX {
                    out[[p, q]] = v;
                }
            }
        }
        out
    }

    /// Laplacian of the subgraph induced by `idx`, for a Laplacian-shaped
    /// `self`: off-diagonal entries among `idx` are kept and the diagonal is
    /// recomputed so that rows sum to zero. Row/column `p` of the result
    /// corresponds to node `idx[p]`.
    pub fn restrict_laplacian(&self, idx: &[usize]) -> CsrMatrix {
        let mut position = vec![usize::MAX; self.n];
        for (p, &i) in idx.iter().enumerate() {
            position[i] = p;
        }
        let mut triplets = Vec::new();
        for (p, &i) in idx.iter().enumerate() {
            let mut diag = 0.0;
            for (j, v) in self.row(i) {
                let q = position[j];
                if j != i && q != usize::MAX {
                    triplets.push((p, q, v));
                    diag -= v;
                }
            }
            triplets.push((p, p, diag));
        }
        CsrMatrix::from_triplets(idx.len(), triplets)
    }

    pub fn from_dense(m: ArrayView2<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let triplets = m
            .indexed_iter()
            .filter(|(_, &v)| v != 0.0)
            .map(|((i, j), &v)| (i, j, v))
            .collect();
        Self::from_triplets(m.nrows(), triplets)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `M · X` for a dense `X` with `n` rows.
    pub fn mul_dense(&self, x: ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.n);
        let mut out = Array2::zeros((self.n, x.ncols()));
        for i in 0..self.n {
            let mut out_row = out.row_mut(i);
            for (j, v) in self.row(i) {
                out_row.scaled_add(v, &x.row(j));
            }
        }
        out
    }

    pub fn diagonal(&self) -> Array1<f64> {
        Array1::from_iter((0..self.n).map(|i| self.get(i, i)))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| (self.get(j, i) - v).abs() <= tol))
    }
}
