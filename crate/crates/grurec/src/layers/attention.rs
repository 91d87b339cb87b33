//! Global attention over the encoder's hidden states.
//!
//! The final state queries every emitted state through a bilinear form:
//! score_t = (h_last W_c) . h_t, masked to the true length, then softmaxed.
//! The scores blend the states into a context vector c, and one auxiliary
//! GRU step refines it: c' = gru(c, h_last). The block outputs [c ; c'].

use crate::error::{Error, Result};
use crate::layers::gru::{GruGrads, GruParams, GruStepCache};
use crate::matrix::{Matrix, Tensor3};
use crate::ops::softmax_in_place;
use crate::rng::SeededRng;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct AttentionParams<T> {
    /// Bilinear score weight, hidden x hidden.
    pub w_c: Matrix<T>,
    /// Auxiliary context cell; input and state are both hidden wide.
    pub gru: GruParams<T>,
}

#[derive(Debug, Clone)]
pub struct AttentionGrads<T> {
    pub w_c: Matrix<T>,
    pub gru: GruGrads<T>,
}

#[derive(Debug, Clone)]
pub struct AttentionCache<T> {
    /// Softmax weights, batch x steps, exact zeros past each length.
    weights: Matrix<T>,
    /// Query rows h_last W_c.
    q: Matrix<T>,
    gru_cache: GruStepCache<T>,
    lengths: Vec<usize>,
}

impl<T: Scalar> AttentionParams<T> {
    pub fn init(hidden_dim: usize, rng: &mut SeededRng) -> Self {
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        AttentionParams {
            w_c: Matrix::random_uniform(hidden_dim, hidden_dim, -bound, bound, rng),
            gru: GruParams::init(hidden_dim, hidden_dim, rng),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_c.rows()
    }

    pub fn grads_zero(&self) -> AttentionGrads<T> {
        AttentionGrads {
            w_c: Matrix::zeros(self.w_c.rows(), self.w_c.cols()),
            gru: self.gru.grads_zero(),
        }
    }
}

impl<T: Scalar> AttentionCache<T> {
    /// Attention weights for inspection, batch x steps.
    pub fn weights(&self) -> &Matrix<T> {
        &self.weights
    }
}

/// Returns the concatenated [context ; auxiliary context], batch x 2*hidden.
pub fn attention_forward<T: Scalar>(
    p: &AttentionParams<T>,
    h_all: &Tensor3<T>,
    h_last: &Matrix<T>,
    lengths: &[usize],
) -> Result<(Matrix<T>, AttentionCache<T>)> {
    let b = h_all.batch();
    let h_dim = h_all.rows();
    let steps = h_all.steps();
    if h_dim != p.hidden_dim() {
        return Err(Error::shape(format!(
            "attention sized for {} features, states have {h_dim}",
            p.hidden_dim()
        )));
    }
    if h_last.shape() != (b, h_dim) || lengths.len() != b {
        return Err(Error::shape("attention inputs disagree on batch size".to_string()));
    }
    for (i, &len) in lengths.iter().enumerate() {
        if len == 0 || len > steps {
            return Err(Error::shape(format!("attention length {len} for row {i} of {steps} steps")));
        }
    }

    let q = h_last.matmul(&p.w_c)?;

    let mut weights = Matrix::zeros(b, steps);
    for i in 0..b {
        let len = lengths[i];
        let mut scores = vec![T::zero(); len];
        for (t, s) in scores.iter_mut().enumerate() {
            let state = h_all.step(t).row(i);
            let mut acc = T::zero();
            for (&qv, &hv) in q.row(i).iter().zip(state.iter()) {
                acc = acc + qv * hv;
            }
            *s = acc;
        }
        softmax_in_place(&mut scores);
        weights.row_mut(i)[..len].copy_from_slice(&scores);
    }

    let mut context = Matrix::zeros(b, h_dim);
    for t in 0..steps {
        let step = h_all.step(t);
        for i in 0..b {
            let w = weights.get(i, t);
            if w == T::zero() {
                continue;
            }
            let dst = context.row_mut(i);
            for (d, &s) in dst.iter_mut().zip(step.row(i).iter()) {
                *d = *d + w * s;
            }
        }
    }

    let (aux, gru_cache) = p.gru.step(&context, h_last)?;
    let out = context.hconcat(&aux)?;
    Ok((out, AttentionCache { weights, q, gru_cache, lengths: lengths.to_vec() }))
}

/// Backward through the block. Returns gradients for every emitted state,
/// for the final state, and for the parameters.
pub fn attention_backward<T: Scalar>(
    p: &AttentionParams<T>,
    cache: &AttentionCache<T>,
    h_all: &Tensor3<T>,
    d_out: &Matrix<T>,
) -> Result<(Tensor3<T>, Matrix<T>, AttentionGrads<T>)> {
    let b = h_all.batch();
    let h_dim = h_all.rows();
    let steps = h_all.steps();
    let (d_context_direct, d_aux) = d_out.split_cols(h_dim)?;

    let mut grads = p.grads_zero();
    let (d_context_gru, mut d_h_last) =
        p.gru.step_backward(&cache.gru_cache, &d_aux, &mut grads.gru)?;
    let d_context = d_context_direct.add(&d_context_gru)?;

    let mut d_h_all = Tensor3::zeros(b, h_dim, steps);
    let mut dq = Matrix::zeros(b, h_dim);
    for i in 0..b {
        let len = cache.lengths[i];
        // Gradient of the context with respect to each weight.
        let mut d_alpha = vec![T::zero(); len];
        for (t, da) in d_alpha.iter_mut().enumerate() {
            let state = h_all.step(t).row(i);
            let mut acc = T::zero();
            for (&g, &s) in d_context.row(i).iter().zip(state.iter()) {
                acc = acc + g * s;
            }
            *da = acc;
        }
        // Softmax backward: ds_t = alpha_t * (d_alpha_t - sum_k alpha_k d_alpha_k).
        let mut dot = T::zero();
        for (t, &da) in d_alpha.iter().enumerate() {
            dot = dot + cache.weights.get(i, t) * da;
        }
        for (t, &da) in d_alpha.iter().enumerate() {
            let alpha = cache.weights.get(i, t);
            let ds = alpha * (da - dot);
            {
                let dst = d_h_all.step_mut(t).row_mut(i);
                for (f, d) in dst.iter_mut().enumerate() {
                    *d = *d + alpha * d_context.get(i, f) + ds * cache.q.get(i, f);
                }
            }
            let state = h_all.step(t).row(i);
            let dq_row = dq.row_mut(i);
            for (f, &s) in state.iter().enumerate() {
                dq_row[f] = dq_row[f] + ds * s;
            }
        }
    }

    // Query path: q = h_last W_c.
    let h_last = &cache.gru_cache.h_prev;
    grads.w_c.add_assign(&h_last.matmul_tn(&dq)?)?;
    d_h_last.add_assign(&dq.matmul_nt(&p.w_c)?)?;

    Ok((d_h_all, d_h_last, grads))
}
