//! Helpers shared by the unit tests. Compiled only for test builds.

use crate::grad::{finite_diff_grad, max_relative_error};
use crate::matrix::Matrix;
use crate::rng::SeededRng;

pub(crate) fn rand_mat(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
    let mut rng = SeededRng::new(seed);
    Matrix::random_uniform(rows, cols, -1.0, 1.0, &mut rng)
}

/// Check an analytic gradient for one tensor against central differences.
///
/// `loss_with` must recompute the scalar loss with the given replacement for
/// the tensor under test, holding everything else (including any randomness)
/// fixed.
pub(crate) fn assert_grad_matches<F>(
    target: &Matrix<f64>,
    analytic: &Matrix<f64>,
    mut loss_with: F,
    tol: f64,
    what: &str,
) where
    F: FnMut(&Matrix<f64>) -> f64,
{
    assert_eq!(target.shape(), analytic.shape(), "{what}: gradient shape");
    let (rows, cols) = target.shape();
    let f = |flat: &[f64]| {
        let m = Matrix::from_vec(rows, cols, flat.to_vec()).unwrap();
        Ok(loss_with(&m))
    };
    let fd = finite_diff_grad(f, target.data(), 1e-5).unwrap();
    let err = max_relative_error(analytic.data(), &fd);
    assert!(err < tol, "{what}: max relative error {err} exceeds {tol}");
}

/// Scalar probe loss: sum of projection-weighted outputs. Fixing the
/// projection makes any matrix-valued layer output scalar-checkable.
pub(crate) fn proj_loss(y: &Matrix<f64>, proj: &Matrix<f64>) -> f64 {
    y.hadamard(proj).unwrap().data().iter().sum()
}
