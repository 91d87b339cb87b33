//! Cross entropy over logits, averaged across the batch.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::ops::log_softmax_rows;
use crate::scalar::Scalar;

/// Mean cross entropy and its gradient with respect to the logits.
///
/// The gradient is (softmax - onehot) / B, so it already includes the batch
/// averaging.
pub fn cross_entropy<T: Scalar>(logits: &Matrix<T>, labels: &[usize]) -> Result<(T, Matrix<T>)> {
    let b = logits.rows();
    let c = logits.cols();
    if b == 0 || c == 0 {
        return Err(Error::shape("cross entropy on an empty logit matrix"));
    }
    if labels.len() != b {
        return Err(Error::shape(format!("{} labels for a batch of {b}", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::data(format!("class index {bad} out of range for {c} classes")));
    }

    let log_probs = log_softmax_rows(logits);
    let mut loss = T::zero();
    let inv_b = T::from_f64(1.0 / b as f64);
    let mut grad = Matrix::zeros(b, c);
    for (i, &label) in labels.iter().enumerate() {
        loss = loss - log_probs.get(i, label);
        let g = grad.row_mut(i);
        for (j, &lp) in log_probs.row(i).iter().enumerate() {
            let p = lp.exp();
            let target = if j == label { T::one() } else { T::zero() };
            g[j] = (p - target) * inv_b;
        }
    }
    Ok((loss * inv_b, grad))
}
