//! Central finite differences, the independent oracle every analytic
//! gradient in this crate is checked against. Always evaluated in f64.

use crate::error::{Error, Result};

/// Central difference gradient of a scalar function at x.
///
/// The step h is applied per coordinate. Errors if h is not positive or the
/// function returns a non-finite value anywhere in the stencil.
pub fn finite_diff_grad<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Oracle(format!("finite difference step must be positive, got {h}")));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let fp = f(&probe)?;
        probe[i] = orig - h;
        let fm = f(&probe)?;
        probe[i] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::Oracle(format!(
                "function returned non-finite value near coordinate {i}"
            )));
        }
        grad.push((fp - fm) / (2.0 * h));
    }
    Ok(grad)
}

/// Relative error between an analytic and a numerical gradient entry.
/// The floor keeps near-zero pairs from blowing up the ratio.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-6);
    (analytic - numeric).abs() / denom
}

/// Largest relative error over two gradient vectors of equal length.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    debug_assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric.iter())
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}
