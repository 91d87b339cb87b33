//! Dense row-major matrices and a batched sequence tensor.
//!
//! This is deliberately a small fixed feature set rather than a general
//! linear algebra library: the model only needs plain matmuls (optionally
//! with one side transposed), elementwise maps, broadcasts over rows, and
//! column sums.

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Entries drawn uniformly from [lo, hi). Draws happen in f64 so the
    /// same seed produces the same weights at either precision.
    pub fn random_uniform(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut SeededRng) -> Self {
        Matrix::from_fn(rows, cols, |_, _| T::from_f64(rng.uniform(lo, hi)))
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

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// self (m x k) * other (k x n).
    pub fn matmul(&self, other: &Matrix<T>) -> Result<Matrix<T>> {
        if self.cols != other.rows {
            return Err(Error::shape(format!(
                "matmul {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = out.row_mut(i);
            for (p, &a_ip) in a_row.iter().enumerate() {
                if a_ip == T::zero() {
                    continue;
                }
                let b_row = other.row(p);
                for (o, &b) in out_row.iter_mut().zip(b_row.iter()) {
                    *o = *o + a_ip * b;
                }
            }
        }
        Ok(out)
    }

    /// self (m x k) * other^T where other is (n x k). Output m x n.
    pub fn matmul_nt(&self, other: &Matrix<T>) -> Result<Matrix<T>> {
        if self.cols != other.cols {
            return Err(Error::shape(format!(
                "matmul_nt {}x{} * ({}x{})^T",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = out.row_mut(i);
            for j in 0..other.rows {
                let b_row = other.row(j);
                let mut acc = T::zero();
                for (&a, &b) in a_row.iter().zip(b_row.iter()) {
                    acc = acc + a * b;
                }
                out_row[j] = acc;
            }
        }
        Ok(out)
    }

    /// self^T * other where self is (k x m), other is (k x n). Output m x n.
    pub fn matmul_tn(&self, other: &Matrix<T>) -> Result<Matrix<T>> {
        if self.rows != other.rows {
            return Err(Error::shape(format!(
                "matmul_tn ({}x{})^T * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        for p in 0..self.rows {
            let a_row = self.row(p);
            let b_row = other.row(p);
            for (i, &a_pi) in a_row.iter().enumerate() {
                if a_pi == T::zero() {
                    continue;
                }
                let out_row = out.row_mut(i);
                for (o, &b) in out_row.iter_mut().zip(b_row.iter()) {
                    *o = *o + a_pi * b;
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix<T> {
        Matrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Matrix<T> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn zip_map(&self, other: &Matrix<T>, f: impl Fn(T, T) -> T) -> Result<Matrix<T>> {
        if self.shape() != other.shape() {
            return Err(Error::shape(format!(
                "elementwise op on {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(other.data.iter()).map(|(&a, &b)| f(a, b)).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn add(&self, other: &Matrix<T>) -> Result<Matrix<T>> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix<T>) -> Result<Matrix<T>> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Matrix<T>) -> Result<Matrix<T>> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: T) -> Matrix<T> {
        self.map(|x| x * s)
    }

    pub fn add_assign(&mut self, other: &Matrix<T>) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(format!(
                "add_assign {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        for (a, &b) in self.data.iter_mut().zip(other.data.iter()) {
            *a = *a + b;
        }
        Ok(())
    }

    /// Add a 1 x cols row vector to every row.
    pub fn add_row_broadcast(&self, row: &Matrix<T>) -> Result<Matrix<T>> {
        if row.rows != 1 || row.cols != self.cols {
            return Err(Error::shape(format!(
                "broadcast row {}x{} onto {}x{}",
                row.rows, row.cols, self.rows, self.cols
            )));
        }
        let mut out = self.clone();
        for r in 0..out.rows {
            for (o, &b) in out.row_mut(r).iter_mut().zip(row.data.iter()) {
                *o = *o + b;
            }
        }
        Ok(out)
    }

    /// Concatenate two matrices with equal row counts side by side.
    pub fn hconcat(&self, other: &Matrix<T>) -> Result<Matrix<T>> {
        if self.rows != other.rows {
            return Err(Error::shape(format!(
                "hconcat {}x{} with {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, self.cols + other.cols);
        for r in 0..self.rows {
            let dst = out.row_mut(r);
            dst[..self.cols].copy_from_slice(self.row(r));
            dst[self.cols..].copy_from_slice(other.row(r));
        }
        Ok(out)
    }

    /// Split columns at `at`, returning the left and right blocks.
    pub fn split_cols(&self, at: usize) -> Result<(Matrix<T>, Matrix<T>)> {
        if at > self.cols {
            return Err(Error::shape(format!("split at column {at} of {}", self.cols)));
        }
        let mut left = Matrix::zeros(self.rows, at);
        let mut right = Matrix::zeros(self.rows, self.cols - at);
        for r in 0..self.rows {
            let src = self.row(r);
            left.row_mut(r).copy_from_slice(&src[..at]);
            right.row_mut(r).copy_from_slice(&src[at..]);
        }
        Ok((left, right))
    }

    /// Sum over rows, producing a 1 x cols matrix.
    pub fn col_sums(&self) -> Matrix<T> {
        let mut out = Matrix::zeros(1, self.cols);
        for r in 0..self.rows {
            for (o, &v) in out.row_mut(0).iter_mut().zip(self.row(r).iter()) {
                *o = *o + v;
            }
        }
        out
    }

    pub fn is_all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Matrix<T>) -> T {
        debug_assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), |m, d| if d > m { d } else { m })
    }
}

/// Batched sequence tensor, semantically batch x features x steps.
///
/// Stored as one batch x features matrix per time step so a whole step can
/// feed a matmul without copying.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3<T> {
    batch: usize,
    rows: usize,
    steps: Vec<Matrix<T>>,
}

impl<T: Scalar> Tensor3<T> {
    pub fn zeros(batch: usize, rows: usize, steps: usize) -> Self {
        Tensor3 { batch, rows, steps: vec![Matrix::zeros(batch, rows); steps] }
    }

    pub fn from_steps(steps: Vec<Matrix<T>>) -> Result<Self> {
        let first = steps
            .first()
            .ok_or_else(|| Error::shape("sequence tensor needs at least one step"))?;
        let (batch, rows) = first.shape();
        for (t, m) in steps.iter().enumerate() {
            if m.shape() != (batch, rows) {
                return Err(Error::shape(format!(
                    "step {t} is {}x{}, expected {batch}x{rows}",
                    m.rows(),
                    m.cols()
                )));
            }
        }
        Ok(Tensor3 { batch, rows, steps })
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn steps(&self) -> usize {
        self.steps.len()
    }

    pub fn step(&self, t: usize) -> &Matrix<T> {
        &self.steps[t]
    }

    pub fn step_mut(&mut self, t: usize) -> &mut Matrix<T> {
        &mut self.steps[t]
    }

    /// All step matrices at once, for callers that need disjoint mutable
    /// access across time.
    pub fn steps_mut(&mut self) -> &mut [Matrix<T>] {
        &mut self.steps
    }

    /// Value at (batch item b, feature r, time t).
    pub fn at(&self, b: usize, r: usize, t: usize) -> T {
        self.steps[t].get(b, r)
    }

    pub fn is_all_finite(&self) -> bool {
        self.steps.iter().all(|m| m.is_all_finite())
    }
}
