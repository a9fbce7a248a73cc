//! Compressed sparse row storage shared by the adjacency operator and the
//! node feature matrix.

use crate::autodiff::Scalar;
use crate::error::{GltError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Builds a CSR matrix from `(row, col, value)` triplets. Triplets are
    /// sorted by `(row, col)`; duplicates are rejected.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        mut triplets: Vec<(usize, usize, T)>,
    ) -> Result<Self> {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; n_rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut prev: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(GltError::shape(
                    "csr",
                    format!("entry ({r}, {c}) outside {n_rows}x{n_cols}"),
                ));
            }
            if prev == Some((r, c)) {
                return Err(GltError::Contract(format!("duplicate csr entry ({r}, {c})")));
            }
            prev = Some((r, c));
            indptr[r + 1] += 1;
            indices.push(c);
            values.push(v);
        }
        for r in 0..n_rows {
            indptr[r + 1] += indptr[r];
        }
        Ok(CsrMatrix {
            n_rows,
            n_cols,
            indptr,
            indices,
            values,
        })
    }

    /// Sparse view of a dense row-major matrix, keeping only non-zero entries.
    pub fn from_dense(n_rows: usize, n_cols: usize, data: &[T]) -> Self {
        assert_eq!(data.len(), n_rows * n_cols);
        let mut indptr = Vec::with_capacity(n_rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in data.chunks(n_cols.max(1)).take(n_rows) {
            for (c, &v) in row.iter().enumerate() {
                if v != T::zero() {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        // zero-column matrices never enter the loop above
        indptr.resize(n_rows + 1, indices.len());
        CsrMatrix {
            n_rows,
            n_cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Column indices and values of one row.
    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    /// Position of `(r, c)` in the value array, if stored.
    pub fn find(&self, r: usize, c: usize) -> Option<usize> {
        let start = self.indptr[r];
        let (cols, _) = self.row(r);
        cols.binary_search(&c).ok().map(|k| start + k)
    }

    /// Dense row-major copy.
    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_rows * self.n_cols];
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out[r * self.n_cols + c] = v;
            }
        }
        out
    }

    /// Same sparsity pattern with replaced values.
    pub fn with_values(&self, values: Vec<T>) -> Result<Self> {
        if values.len() != self.nnz() {
            return Err(GltError::shape(
                "csr_with_values",
                format!("expected {} values, got {}", self.nnz(), values.len()),
            ));
        }
        Ok(CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values,
        })
    }

    pub fn cast<U: Scalar>(&self) -> CsrMatrix<U> {
        CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values: self.values.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}
