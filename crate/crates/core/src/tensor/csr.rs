use rayon::prelude::*;

use super::{parallel_enabled, DenseMatrix, Field, Rng, Scalar};
use crate::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T = f64> {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Field> CsrMatrix<T> {
    /// Assemble from raw arrays, checking every structural invariant.
    pub fn from_parts(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self> {
        let m = Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        };
        m.validate()?;
        Ok(m)
    }

    /// Build from `(row, col, value)` triplets. Duplicate coordinates are
    /// summed; triplets may arrive in any order.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, T)> = triplets.to_vec();
        if let Some(&(r, c, _)) = sorted.iter().find(|&&(r, c, _)| r >= rows || c >= cols) {
            return Err(Error::InvalidArgument(format!(
                "triplet ({r}, {c}) outside a {rows}x{cols} matrix"
            )));
        }
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(sorted.len());
        let mut values: Vec<T> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
                continue;
            }
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
            last = Some((r, c));
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self::from_parts(rows, cols, row_ptr, col_idx, values)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Format(format!("invalid CSR: {msg}")));
        if self.row_ptr.len() != self.rows + 1 {
            return bad(format!(
                "row_ptr has {} entries for {} rows",
                self.row_ptr.len(),
                self.rows
            ));
        }
        if self.row_ptr[0] != 0 {
            return bad("row_ptr[0] != 0".into());
        }
        if self.row_ptr.windows(2).any(|w| w[0] > w[1]) {
            return bad("row_ptr decreases".into());
        }
        let nnz = self.row_ptr[self.rows];
        if nnz != self.col_idx.len() || nnz != self.values.len() {
            return bad(format!(
                "row_ptr ends at {nnz} but there are {} columns and {} values",
                self.col_idx.len(),
                self.values.len()
            ));
        }
        for i in 0..self.rows {
            let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("row {i} columns not strictly increasing"));
            }
            if cols.last().is_some_and(|&c| c >= self.cols) {
                return bad(format!("row {i} has a column index >= {}", self.cols));
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                d.set(i, self.col_idx[p], self.values[p]);
            }
        }
        d
    }

    /// `C = A·B` with `A` sparse. Each `C[i][j]` accumulates the stored
    /// entries of row `i` in ascending column order.
    pub fn spmm(&self, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        if self.cols != b.rows() {
            return Err(Error::ShapeMismatch {
                op: "csr_spmm",
                lhs: self.shape(),
                rhs: b.shape(),
            });
        }
        let width = b.cols();
        let mut c = DenseMatrix::zeros(self.rows, width);
        if width == 0 {
            return Ok(c);
        }
        let bd = b.as_slice();
        let kernel = |(i, c_row): (usize, &mut [T])| {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let v = self.values[p];
                let k = self.col_idx[p];
                for (c_ij, &b_kj) in c_row.iter_mut().zip(&bd[k * width..(k + 1) * width]) {
                    *c_ij += v * b_kj;
                }
            }
        };
        if parallel_enabled(self.nnz() * width) {
            c.as_mut_slice().par_chunks_mut(width).enumerate().for_each(kernel);
        } else {
            c.as_mut_slice().chunks_mut(width).enumerate().for_each(kernel);
        }
        Ok(c)
    }

    /// `y = A·x`.
    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        if self.cols != x.len() {
            return Err(Error::ShapeMismatch {
                op: "csr_matvec",
                lhs: self.shape(),
                rhs: (x.len(), 1),
            });
        }
        Ok((0..self.rows)
            .map(|i| {
                let mut acc = T::zero();
                for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                    acc += self.values[p] * x[self.col_idx[p]];
                }
                acc
            })
            .collect())
    }
}

impl<T: Scalar> CsrMatrix<T> {
    /// Keep entries with `|a_ij| > zero_tol`.
    pub fn from_dense(a: &DenseMatrix<T>, zero_tol: f64) -> Result<Self> {
        if zero_tol.is_nan() || zero_tol < 0.0 {
            return Err(Error::InvalidArgument(format!("zero_tol must be >= 0, got {zero_tol}")));
        }
        let mut row_ptr = Vec::with_capacity(a.rows() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in a.row_iter() {
            for (j, &v) in row.iter().enumerate() {
                if v.to_f64().abs() > zero_tol {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(values.len());
        }
        Ok(Self {
            rows: a.rows(),
            cols: a.cols(),
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Random matrix with exactly `round((1 - sparsity)·rows·cols)` stored
    /// entries at distinct positions, values uniform in `[-1, 1]`.
    pub fn random_sparse(rows: usize, cols: usize, sparsity: f64, rng: &mut Rng) -> Result<Self> {
        if !(0.0..1.0).contains(&sparsity) {
            return Err(Error::InvalidArgument(format!(
                "sparsity must lie in [0, 1), got {sparsity}"
            )));
        }
        let total = rows * cols;
        let nnz = ((1.0 - sparsity) * total as f64).round() as usize;
        let mut positions = rng.sample_indices(total, nnz.min(total));
        positions.sort_unstable();
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(positions.len());
        let mut values = Vec::with_capacity(positions.len());
        for pos in positions {
            row_ptr[pos / cols + 1] += 1;
            col_idx.push(pos % cols);
            values.push(T::from_f64(rng.uniform(-1.0, 1.0)));
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self::from_parts(rows, cols, row_ptr, col_idx, values)
    }
}
