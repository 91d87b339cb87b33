//! Inverted dropout. Kept units are rescaled by 1/keep so eval mode is the
//! identity and no rescaling happens at inference time.

use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::matrix::Matrix;
use crate::rng::SeededRng;
use crate::scalar::Scalar;

/// Mask of per-unit multipliers, or None when the pass was an identity.
#[derive(Debug, Clone)]
pub struct DropoutCache<T> {
    pub mask: Option<Matrix<T>>,
}

pub fn dropout_forward<T: Scalar>(
    x: &Matrix<T>,
    rate: f64,
    mode: Mode,
    rng: Option<&mut SeededRng>,
) -> Result<(Matrix<T>, DropoutCache<T>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::config(format!("dropout rate must be in [0, 1), got {rate}")));
    }
    if mode == Mode::Eval || rate == 0.0 {
        return Ok((x.clone(), DropoutCache { mask: None }));
    }
    let rng = rng.ok_or_else(|| Error::config("dropout in training mode needs an rng"))?;
    let keep = 1.0 - rate;
    let scale = T::from_f64(1.0 / keep);
    let mask = Matrix::from_fn(x.rows(), x.cols(), |_, _| {
        if rng.uniform(0.0, 1.0) < keep {
            scale
        } else {
            T::zero()
        }
    });
    let y = x.hadamard(&mask)?;
    Ok((y, DropoutCache { mask: Some(mask) }))
}

pub fn dropout_backward<T: Scalar>(cache: &DropoutCache<T>, dy: &Matrix<T>) -> Result<Matrix<T>> {
    match &cache.mask {
        None => Ok(dy.clone()),
        Some(mask) => dy.hadamard(mask),
    }
}
