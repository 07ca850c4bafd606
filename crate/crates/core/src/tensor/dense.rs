use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{parallel_enabled, Field, Rng, Scalar};
use crate::{Error, Result};

/// Row-major dense matrix.
///
/// A batch of vectors is stored one vector per row. Zero-sized shapes are
/// permitted so that rank-0 low-rank factors (`n × 0`, `0 × n`) can be
/// represented without special cases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix<T = f64> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

/// Owned vector of scalars.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseVector<T = f64> {
    data: Vec<T>,
}

/// Complex operand of the FFT specialization.
pub type ComplexVector = DenseVector<Complex64>;

impl<T: Field> DenseVector<T> {
    pub fn from_vec(data: Vec<T>) -> Self {
        Self { data }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            data: vec![T::zero(); len],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// View as a `len × 1` column.
    pub fn to_column(&self) -> DenseMatrix<T> {
        DenseMatrix {
            rows: self.data.len(),
            cols: 1,
            data: self.data.clone(),
        }
    }
}

impl<T: Field> From<Vec<T>> for DenseVector<T> {
    fn from(data: Vec<T>) -> Self {
        Self { data }
    }
}

impl<T: Field> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument("ragged rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    /// Build `rows × cols` by evaluating `f(i, j)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
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

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[T]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `C = A·B` with `C[i][j]` accumulated over ascending `k`.
    ///
    /// The loop order is i-k-j, which keeps the per-element summation order
    /// of the textbook triple loop (so results are bit-identical to it) while
    /// letting the inner loop vectorize across `j`. Output rows may be
    /// computed in parallel; each row is owned by one task.
    pub fn matmul(&self, b: &Self) -> Result<Self> {
        if self.cols != b.rows {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: self.shape(),
                rhs: b.shape(),
            });
        }
        let mut c = Self::zeros(self.rows, b.cols);
        if b.cols == 0 || self.rows == 0 {
            return Ok(c);
        }
        let kernel = |(i, c_row): (usize, &mut [T])| {
            let a_row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (k, &a_ik) in a_row.iter().enumerate() {
                let b_row = &b.data[k * b.cols..(k + 1) * b.cols];
                for (c_ij, &b_kj) in c_row.iter_mut().zip(b_row) {
                    *c_ij += a_ik * b_kj;
                }
            }
        };
        if parallel_enabled(self.rows * self.cols * b.cols) {
            c.data.par_chunks_mut(b.cols).enumerate().for_each(kernel);
        } else {
            c.data.chunks_mut(b.cols).enumerate().for_each(kernel);
        }
        Ok(c)
    }

    /// `A·Bᵀ`.
    pub fn matmul_nt(&self, b: &Self) -> Result<Self> {
        if self.cols != b.cols {
            return Err(Error::ShapeMismatch {
                op: "matmul_nt",
                lhs: self.shape(),
                rhs: b.shape(),
            });
        }
        let mut c = Self::zeros(self.rows, b.rows);
        if b.rows == 0 || self.rows == 0 {
            return Ok(c);
        }
        let kernel = |(i, c_row): (usize, &mut [T])| {
            let a_row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (j, c_ij) in c_row.iter_mut().enumerate() {
                let b_row = &b.data[j * b.cols..(j + 1) * b.cols];
                let mut acc = T::zero();
                for (&a_ik, &b_jk) in a_row.iter().zip(b_row) {
                    acc += a_ik * b_jk;
                }
                *c_ij = acc;
            }
        };
        if parallel_enabled(self.rows * self.cols * b.rows) {
            c.data.par_chunks_mut(b.rows).enumerate().for_each(kernel);
        } else {
            c.data.chunks_mut(b.rows).enumerate().for_each(kernel);
        }
        Ok(c)
    }

    /// `Aᵀ·B`, accumulated over ascending rows of `A` and `B`.
    pub fn matmul_tn(&self, b: &Self) -> Result<Self> {
        if self.rows != b.rows {
            return Err(Error::ShapeMismatch {
                op: "matmul_tn",
                lhs: self.shape(),
                rhs: b.shape(),
            });
        }
        let mut c = Self::zeros(self.cols, b.cols);
        if b.cols == 0 || self.cols == 0 {
            return Ok(c);
        }
        let kernel = |(i, c_row): (usize, &mut [T])| {
            for k in 0..self.rows {
                let a_ki = self.data[k * self.cols + i];
                let b_row = &b.data[k * b.cols..(k + 1) * b.cols];
                for (c_ij, &b_kj) in c_row.iter_mut().zip(b_row) {
                    *c_ij += a_ki * b_kj;
                }
            }
        };
        if parallel_enabled(self.rows * self.cols * b.cols) {
            c.data.par_chunks_mut(b.cols).enumerate().for_each(kernel);
        } else {
            c.data.chunks_mut(b.cols).enumerate().for_each(kernel);
        }
        Ok(c)
    }

    /// `y = A·x`, each `y[i]` accumulated over ascending `k`.
    pub fn matvec(&self, x: &DenseVector<T>) -> Result<DenseVector<T>> {
        self.matvec_slice(x.as_slice()).map(DenseVector::from_vec)
    }

    pub fn matvec_slice(&self, x: &[T]) -> Result<Vec<T>> {
        if self.cols != x.len() {
            return Err(Error::ShapeMismatch {
                op: "matvec",
                lhs: self.shape(),
                rhs: (x.len(), 1),
            });
        }
        Ok((0..self.rows)
            .map(|i| {
                let mut acc = T::zero();
                for (&a, &xk) in self.row(i).iter().zip(x) {
                    acc += a * xk;
                }
                acc
            })
            .collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                op: "add",
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        })
    }
}

impl<T: Scalar> DenseMatrix<T> {
    /// Entries drawn independently from `U(lo, hi)`.
    pub fn random_uniform(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut Rng) -> Self {
        let data = (0..rows * cols).map(|_| T::from_f64(rng.uniform(lo, hi))).collect();
        Self { rows, cols, data }
    }

    /// Entries drawn from `N(0, 1)`.
    pub fn random_normal(rows: usize, cols: usize, rng: &mut Rng) -> Self {
        let data = (0..rows * cols).map(|_| T::from_f64(rng.normal())).collect();
        Self { rows, cols, data }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.to_f64().abs()).fold(0.0, f64::max)
    }

    /// `max |self - other|`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape(), "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.to_f64() - b.to_f64()).abs())
            .fold(0.0, f64::max)
    }

    /// Max-norm relative error `max|self - reference| / max|reference|`.
    /// Falls back to the absolute error when the reference is all zeros.
    pub fn rel_err(&self, reference: &Self) -> f64 {
        let scale = reference.max_abs();
        let diff = self.max_abs_diff(reference);
        if scale > 0.0 {
            diff / scale
        } else {
            diff
        }
    }

    /// Induced infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        self.row_iter()
            .map(|r| r.iter().map(|v| v.to_f64().abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn cast<U: Scalar>(&self) -> DenseMatrix<U> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
        }
    }
}
