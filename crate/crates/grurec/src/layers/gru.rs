//! Gated recurrent unit cell and the sequence layer built on it.
//!
//! Update rule per step, all gates with separate input and hidden biases:
//!
//!   r = sigmoid(x W_xr^T + b_xr + h_prev W_hr^T + b_hr)
//!   u = sigmoid(x W_xu^T + b_xu + h_prev W_hu^T + b_hu)
//!   c = tanh(x W_xc^T + b_xc + r * (h_prev W_hc^T + b_hc))
//!   h = u * h_prev + (1 - u) * c
//!
//! The sequence layer runs the cell over a padded batch and freezes each
//! row's state once that sequence ends, so padding never leaks into the
//! hidden trajectory or the gradients.

use crate::error::{Error, Result};
use crate::matrix::{Matrix, Tensor3};
use crate::ops::{sigmoid_mat, tanh_mat};
use crate::rng::SeededRng;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct GruParams<T> {
    pub w_xr: Matrix<T>,
    pub w_xu: Matrix<T>,
    pub w_xc: Matrix<T>,
    pub w_hr: Matrix<T>,
    pub w_hu: Matrix<T>,
    pub w_hc: Matrix<T>,
    pub b_xr: Matrix<T>,
    pub b_xu: Matrix<T>,
    pub b_xc: Matrix<T>,
    pub b_hr: Matrix<T>,
    pub b_hu: Matrix<T>,
    pub b_hc: Matrix<T>,
}

#[derive(Debug, Clone)]
pub struct GruGrads<T> {
    pub w_xr: Matrix<T>,
    pub w_xu: Matrix<T>,
    pub w_xc: Matrix<T>,
    pub w_hr: Matrix<T>,
    pub w_hu: Matrix<T>,
    pub w_hc: Matrix<T>,
    pub b_xr: Matrix<T>,
    pub b_xu: Matrix<T>,
    pub b_xc: Matrix<T>,
    pub b_hr: Matrix<T>,
    pub b_hu: Matrix<T>,
    pub b_hc: Matrix<T>,
}

/// Everything the cell backward needs about one step.
#[derive(Debug, Clone)]
pub struct GruStepCache<T> {
    pub x: Matrix<T>,
    pub h_prev: Matrix<T>,
    pub r: Matrix<T>,
    pub u: Matrix<T>,
    pub c: Matrix<T>,
    /// k = h_prev W_hc^T + b_hc, the gated hidden contribution before r.
    pub k: Matrix<T>,
}

impl<T: Scalar> GruParams<T> {
    /// Uniform init in [-1/sqrt(hidden), 1/sqrt(hidden)) for weights, zero
    /// biases. Draw order is fixed so a seed pins the weights exactly.
    pub fn init(input_dim: usize, hidden_dim: usize, rng: &mut SeededRng) -> Self {
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        let mut w = |rows, cols| Matrix::random_uniform(rows, cols, -bound, bound, rng);
        let w_xr = w(hidden_dim, input_dim);
        let w_xu = w(hidden_dim, input_dim);
        let w_xc = w(hidden_dim, input_dim);
        let w_hr = w(hidden_dim, hidden_dim);
        let w_hu = w(hidden_dim, hidden_dim);
        let w_hc = w(hidden_dim, hidden_dim);
        GruParams {
            w_xr,
            w_xu,
            w_xc,
            w_hr,
            w_hu,
            w_hc,
            b_xr: Matrix::zeros(1, hidden_dim),
            b_xu: Matrix::zeros(1, hidden_dim),
            b_xc: Matrix::zeros(1, hidden_dim),
            b_hr: Matrix::zeros(1, hidden_dim),
            b_hu: Matrix::zeros(1, hidden_dim),
            b_hc: Matrix::zeros(1, hidden_dim),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_xr.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_xr.rows()
    }

    /// One step over a batch of rows.
    pub fn step(&self, x: &Matrix<T>, h_prev: &Matrix<T>) -> Result<(Matrix<T>, GruStepCache<T>)> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape(format!(
                "gru input has {} features, cell expects {}",
                x.cols(),
                self.input_dim()
            )));
        }
        if h_prev.cols() != self.hidden_dim() || h_prev.rows() != x.rows() {
            return Err(Error::shape(format!(
                "gru state is {}x{}, expected {}x{}",
                h_prev.rows(),
                h_prev.cols(),
                x.rows(),
                self.hidden_dim()
            )));
        }

        let a_r = x
            .matmul_nt(&self.w_xr)?
            .add_row_broadcast(&self.b_xr)?
            .add(&h_prev.matmul_nt(&self.w_hr)?.add_row_broadcast(&self.b_hr)?)?;
        let r = sigmoid_mat(&a_r);

        let a_u = x
            .matmul_nt(&self.w_xu)?
            .add_row_broadcast(&self.b_xu)?
            .add(&h_prev.matmul_nt(&self.w_hu)?.add_row_broadcast(&self.b_hu)?)?;
        let u = sigmoid_mat(&a_u);

        let k = h_prev.matmul_nt(&self.w_hc)?.add_row_broadcast(&self.b_hc)?;
        let a_c = x.matmul_nt(&self.w_xc)?.add_row_broadcast(&self.b_xc)?.add(&r.hadamard(&k)?)?;
        let c = tanh_mat(&a_c);

        let one = T::one();
        let h = u.hadamard(h_prev)?.add(&u.map(|v| one - v).hadamard(&c)?)?;
        let cache = GruStepCache { x: x.clone(), h_prev: h_prev.clone(), r, u, c, k };
        Ok((h, cache))
    }

    /// Backward through one step. Accumulates parameter gradients into
    /// `grads` and returns (dx, dh_prev).
    pub fn step_backward(
        &self,
        cache: &GruStepCache<T>,
        dh: &Matrix<T>,
        grads: &mut GruGrads<T>,
    ) -> Result<(Matrix<T>, Matrix<T>)> {
        let one = T::one();
        let GruStepCache { x, h_prev, r, u, c, k } = cache;

        let du = dh.hadamard(&h_prev.sub(c)?)?;
        let dc = dh.hadamard(&u.map(|v| one - v))?;
        let da_c = dc.hadamard(&c.map(|v| one - v * v))?;
        let dr = da_c.hadamard(k)?;
        let dk = da_c.hadamard(r)?;
        let da_u = du.hadamard(&u.map(|v| v * (one - v)))?;
        let da_r = dr.hadamard(&r.map(|v| v * (one - v)))?;

        grads.w_xc.add_assign(&da_c.matmul_tn(x)?)?;
        grads.b_xc.add_assign(&da_c.col_sums())?;
        grads.w_hc.add_assign(&dk.matmul_tn(h_prev)?)?;
        grads.b_hc.add_assign(&dk.col_sums())?;
        grads.w_xr.add_assign(&da_r.matmul_tn(x)?)?;
        grads.b_xr.add_assign(&da_r.col_sums())?;
        grads.w_hr.add_assign(&da_r.matmul_tn(h_prev)?)?;
        grads.b_hr.add_assign(&da_r.col_sums())?;
        grads.w_xu.add_assign(&da_u.matmul_tn(x)?)?;
        grads.b_xu.add_assign(&da_u.col_sums())?;
        grads.w_hu.add_assign(&da_u.matmul_tn(h_prev)?)?;
        grads.b_hu.add_assign(&da_u.col_sums())?;

        let dx = da_r
            .matmul(&self.w_xr)?
            .add(&da_u.matmul(&self.w_xu)?)?
            .add(&da_c.matmul(&self.w_xc)?)?;
        let dh_prev = dh
            .hadamard(u)?
            .add(&da_r.matmul(&self.w_hr)?)?
            .add(&da_u.matmul(&self.w_hu)?)?
            .add(&dk.matmul(&self.w_hc)?)?;
        Ok((dx, dh_prev))
    }

    pub fn grads_zero(&self) -> GruGrads<T> {
        let h = self.hidden_dim();
        let n = self.input_dim();
        GruGrads {
            w_xr: Matrix::zeros(h, n),
            w_xu: Matrix::zeros(h, n),
            w_xc: Matrix::zeros(h, n),
            w_hr: Matrix::zeros(h, h),
            w_hu: Matrix::zeros(h, h),
            w_hc: Matrix::zeros(h, h),
            b_xr: Matrix::zeros(1, h),
            b_xu: Matrix::zeros(1, h),
            b_xc: Matrix::zeros(1, h),
            b_hr: Matrix::zeros(1, h),
            b_hu: Matrix::zeros(1, h),
            b_hc: Matrix::zeros(1, h),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GruLayerCache<T> {
    step_caches: Vec<GruStepCache<T>>,
    lengths: Vec<usize>,
}

/// Run the cell over a padded batch. Rows whose sequence has ended keep
/// their state unchanged, so `h_last` row i equals the state right after
/// step lengths[i] - 1.
///
/// Returns (all hidden states as batch x hidden x steps, final states, cache).
pub fn gru_layer_forward<T: Scalar>(
    p: &GruParams<T>,
    input: &Tensor3<T>,
    lengths: &[usize],
) -> Result<(Tensor3<T>, Matrix<T>, GruLayerCache<T>)> {
    let b = input.batch();
    let steps = input.steps();
    if lengths.len() != b {
        return Err(Error::shape(format!("{} lengths for batch of {b}", lengths.len())));
    }
    for (i, &len) in lengths.iter().enumerate() {
        if len == 0 {
            return Err(Error::data(format!("sequence {i} in batch has length 0")));
        }
        if len > steps {
            return Err(Error::shape(format!(
                "sequence {i} claims length {len} but the batch is padded to {steps}"
            )));
        }
    }

    let h_dim = p.hidden_dim();
    let mut h = Matrix::zeros(b, h_dim);
    let mut all = Vec::with_capacity(steps);
    let mut step_caches = Vec::with_capacity(steps);
    for t in 0..steps {
        let (h_cell, cache) = p.step(input.step(t), &h)?;
        let mut h_next = h_cell;
        for (i, &len) in lengths.iter().enumerate() {
            if t >= len {
                let prev = h.row(i).to_vec();
                h_next.row_mut(i).copy_from_slice(&prev);
            }
        }
        debug_assert!(h_next.is_all_finite(), "gru state became non-finite at step {t}");
        all.push(h_next.clone());
        step_caches.push(cache);
        h = h_next;
    }
    let h_all = Tensor3::from_steps(all)?;
    Ok((h_all, h, GruLayerCache { step_caches, lengths: lengths.to_vec() }))
}

/// Backprop through time. `d_h_all` carries upstream gradient for every
/// emitted state (zeros where unused) and `d_h_last` for the final state.
///
/// Returns the gradient with respect to the layer input and the parameter
/// gradients summed over time.
pub fn gru_layer_backward<T: Scalar>(
    p: &GruParams<T>,
    cache: &GruLayerCache<T>,
    d_h_all: &Tensor3<T>,
    d_h_last: &Matrix<T>,
) -> Result<(Tensor3<T>, GruGrads<T>)> {
    let steps = cache.step_caches.len();
    let b = cache.lengths.len();
    let mut grads = p.grads_zero();
    let mut dx_steps = vec![Matrix::zeros(b, p.input_dim()); steps];

    // Frozen steps pass gradient through untouched, so the final-state
    // gradient can simply seed the carry at the last padded step.
    let mut carry = d_h_last.clone();
    for t in (0..steps).rev() {
        let mut g = carry.add(d_h_all.step(t))?;
        // Rows already past their end at this step bypass the cell.
        let mut skipped = Matrix::zeros(b, p.hidden_dim());
        for (i, &len) in cache.lengths.iter().enumerate() {
            if t >= len {
                let row = g.row(i).to_vec();
                skipped.row_mut(i).copy_from_slice(&row);
                for v in g.row_mut(i) {
                    *v = T::zero();
                }
            }
        }
        let (dx_t, dh_prev) = p.step_backward(&cache.step_caches[t], &g, &mut grads)?;
        dx_steps[t] = dx_t;
        carry = dh_prev.add(&skipped)?;
    }
    Ok((Tensor3::from_steps(dx_steps)?, grads))
}
