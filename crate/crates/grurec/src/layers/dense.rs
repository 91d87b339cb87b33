//! Fully connected layer, y = x W^T + b.

use crate::error::Result;
use crate::matrix::Matrix;
use crate::rng::SeededRng;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct DenseParams<T> {
    /// Weight matrix, out_dim x in_dim.
    pub w: Matrix<T>,
    /// Bias row, 1 x out_dim.
    pub b: Matrix<T>,
}

#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    pub w: Matrix<T>,
    pub b: Matrix<T>,
}

impl<T: Scalar> DenseParams<T> {
    /// Fan-in uniform init, weights in [-1/sqrt(in), 1/sqrt(in)), zero bias.
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut SeededRng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        DenseParams {
            w: Matrix::random_uniform(out_dim, in_dim, -bound, bound, rng),
            b: Matrix::zeros(1, out_dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }

    /// Forward pass. The cache is just the input.
    pub fn forward(&self, x: &Matrix<T>) -> Result<(Matrix<T>, Matrix<T>)> {
        let y = x.matmul_nt(&self.w)?.add_row_broadcast(&self.b)?;
        Ok((y, x.clone()))
    }

    pub fn backward(&self, x: &Matrix<T>, dy: &Matrix<T>) -> Result<(Matrix<T>, DenseGrads<T>)> {
        let dx = dy.matmul(&self.w)?;
        let dw = dy.matmul_tn(x)?;
        let db = dy.col_sums();
        Ok((dx, DenseGrads { w: dw, b: db }))
    }

    pub fn grads_zero(&self) -> DenseGrads<T> {
        DenseGrads { w: Matrix::zeros(self.w.rows(), self.w.cols()), b: Matrix::zeros(1, self.b.cols()) }
    }
}
