//! Batch normalization over feature columns.
//!
//! Training normalizes with the biased batch variance and proposes an update
//! to the running statistics; the caller commits that update after the step.
//! Keeping the forward pure makes it directly checkable against the finite
//! difference oracle. Eval normalizes with the running statistics.

use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::matrix::Matrix;
use crate::scalar::Scalar;

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPSILON: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct BatchNormParams<T> {
    pub gamma: Matrix<T>,
    pub beta: Matrix<T>,
    pub running_mean: Matrix<T>,
    pub running_var: Matrix<T>,
}

#[derive(Debug, Clone)]
pub struct BatchNormGrads<T> {
    pub gamma: Matrix<T>,
    pub beta: Matrix<T>,
}

#[derive(Debug, Clone)]
pub struct BnCache<T> {
    mode: Mode,
    x_hat: Matrix<T>,
    inv_std: Matrix<T>,
    /// Running statistics to adopt after the optimizer step (train only).
    pending: Option<(Matrix<T>, Matrix<T>)>,
}

impl<T: Scalar> BatchNormParams<T> {
    pub fn init(dim: usize) -> Self {
        BatchNormParams {
            gamma: Matrix::from_fn(1, dim, |_, _| T::one()),
            beta: Matrix::zeros(1, dim),
            running_mean: Matrix::zeros(1, dim),
            running_var: Matrix::from_fn(1, dim, |_, _| T::one()),
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.cols()
    }

    pub fn forward(&self, x: &Matrix<T>, mode: Mode) -> Result<(Matrix<T>, BnCache<T>)> {
        let (b, d) = x.shape();
        if d != self.dim() {
            return Err(Error::shape(format!("batchnorm dim {} on input with {d} features", self.dim())));
        }
        let eps = T::from_f64(BN_EPSILON);
        match mode {
            Mode::Train => {
                if b < 2 {
                    return Err(Error::data(format!(
                        "batch normalization needs at least 2 rows in training, got {b}"
                    )));
                }
                let inv_b = T::from_f64(1.0 / b as f64);
                let mean = x.col_sums().scale(inv_b);
                let centered = x.sub(&mean.broadcast_to_rows(b))?;
                let var = centered.map(|v| v * v).col_sums().scale(inv_b);
                let inv_std = var.map(|v| T::one() / (v + eps).sqrt());
                let x_hat = centered.hadamard(&inv_std.broadcast_to_rows(b))?;
                let y = x_hat
                    .hadamard(&self.gamma.broadcast_to_rows(b))?
                    .add_row_broadcast(&self.beta)?;

                let momentum = T::from_f64(BN_MOMENTUM);
                let keep = T::one() - momentum;
                // Running variance uses the unbiased estimate.
                let unbiased = var.scale(T::from_f64(b as f64 / (b as f64 - 1.0)));
                let new_mean = self.running_mean.scale(keep).add(&mean.scale(momentum))?;
                let new_var = self.running_var.scale(keep).add(&unbiased.scale(momentum))?;

                Ok((y, BnCache { mode, x_hat, inv_std, pending: Some((new_mean, new_var)) }))
            }
            Mode::Eval => {
                let inv_std = self.running_var.map(|v| T::one() / (v + eps).sqrt());
                let x_hat = x
                    .sub(&self.running_mean.broadcast_to_rows(b))?
                    .hadamard(&inv_std.broadcast_to_rows(b))?;
                let y = x_hat
                    .hadamard(&self.gamma.broadcast_to_rows(b))?
                    .add_row_broadcast(&self.beta)?;
                Ok((y, BnCache { mode, x_hat, inv_std, pending: None }))
            }
        }
    }

    pub fn backward(
        &self,
        cache: &BnCache<T>,
        dy: &Matrix<T>,
    ) -> Result<(Matrix<T>, BatchNormGrads<T>)> {
        let (b, _) = dy.shape();
        let d_gamma = dy.hadamard(&cache.x_hat)?.col_sums();
        let d_beta = dy.col_sums();
        let dx_hat = dy.hadamard(&self.gamma.broadcast_to_rows(b))?;
        let dx = match cache.mode {
            Mode::Eval => dx_hat.hadamard(&cache.inv_std.broadcast_to_rows(b))?,
            Mode::Train => {
                // dx = inv_std/B * (B*dx_hat - sum(dx_hat) - x_hat * sum(dx_hat*x_hat))
                let sum_dx_hat = dx_hat.col_sums();
                let sum_dx_hat_x_hat = dx_hat.hadamard(&cache.x_hat)?.col_sums();
                let bt = T::from_f64(b as f64);
                let term = dx_hat
                    .scale(bt)
                    .sub(&sum_dx_hat.broadcast_to_rows(b))?
                    .sub(&cache.x_hat.hadamard(&sum_dx_hat_x_hat.broadcast_to_rows(b))?)?;
                term.hadamard(&cache.inv_std.scale(T::one() / bt).broadcast_to_rows(b))?
            }
        };
        Ok((dx, BatchNormGrads { gamma: d_gamma, beta: d_beta }))
    }

    /// Adopt the running statistics proposed by a training forward pass.
    pub fn commit_running(&mut self, cache: &BnCache<T>) {
        if let Some((mean, var)) = &cache.pending {
            self.running_mean = mean.clone();
            self.running_var = var.clone();
        }
    }

    pub fn grads_zero(&self) -> BatchNormGrads<T> {
        BatchNormGrads { gamma: Matrix::zeros(1, self.dim()), beta: Matrix::zeros(1, self.dim()) }
    }
}

impl<T: Scalar> Matrix<T> {
    /// Repeat a 1 x D row matrix across `rows` rows.
    pub(crate) fn broadcast_to_rows(&self, rows: usize) -> Matrix<T> {
        debug_assert_eq!(self.rows(), 1);
        Matrix::from_fn(rows, self.cols(), |_, c| self.get(0, c))
    }
}
