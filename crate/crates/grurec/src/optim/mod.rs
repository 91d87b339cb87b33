//! Adam optimizer and the training loop built on top of it.

pub mod metrics;
pub mod train;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Adam hyperparameters. Weight decay is coupled (added to the gradient
/// before the moment updates), not the decoupled AdamW variant.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.0 }
    }
}

/// First and second moment estimates, one matrix per parameter tensor,
/// in the same order as `Model::trainable_tensors`.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    m: Vec<Matrix<T>>,
    v: Vec<Matrix<T>>,
    t: u64,
}

impl<T: Scalar> AdamState<T> {
    /// Zero-initialized state shaped after `params`.
    pub fn new(params: &[&Matrix<T>]) -> Self {
        let m = params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect::<Vec<_>>();
        let v = m.clone();
        Self { m, v, t: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One update over all tensors. `params` and `grads` must match the
    /// layout this state was created with.
    pub fn step(
        &mut self,
        cfg: &AdamConfig,
        params: &mut [&mut Matrix<T>],
        grads: &[&Matrix<T>],
    ) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape(format!(
                "adam: expected {} tensors, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.t += 1;
        let b1 = T::from_f64(cfg.beta1);
        let b2 = T::from_f64(cfg.beta2);
        let one = T::one();
        let lr = T::from_f64(cfg.lr);
        let eps = T::from_f64(cfg.eps);
        let wd = T::from_f64(cfg.weight_decay);
        // Bias corrections depend only on the step counter.
        let c1 = T::from_f64(1.0 - cfg.beta1.powi(self.t as i32));
        let c2 = T::from_f64(1.0 - cfg.beta2.powi(self.t as i32));

        for i in 0..self.m.len() {
            let p = &mut *params[i];
            let g = grads[i];
            if p.shape() != self.m[i].shape() || g.shape() != self.m[i].shape() {
                return Err(Error::shape(format!(
                    "adam: tensor {} shape mismatch (state {:?}, param {:?}, grad {:?})",
                    i,
                    self.m[i].shape(),
                    p.shape(),
                    g.shape()
                )));
            }
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let pd = p.data_mut();
            let gd = g.data();
            for j in 0..pd.len() {
                let grad = gd[j] + wd * pd[j];
                m[j] = b1 * m[j] + (one - b1) * grad;
                v[j] = b2 * v[j] + (one - b2) * grad * grad;
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                pd[j] = pd[j] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
