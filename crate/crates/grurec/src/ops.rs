//! Elementwise activations and numerically safe softmax kernels.

use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    // Split on sign so exp never overflows.
    if x >= T::zero() {
        let e = (-x).exp();
        T::one() / (T::one() + e)
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[inline]
pub fn relu<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

pub fn sigmoid_mat<T: Scalar>(m: &Matrix<T>) -> Matrix<T> {
    m.map(sigmoid)
}

pub fn tanh_mat<T: Scalar>(m: &Matrix<T>) -> Matrix<T> {
    m.map(|x| x.tanh())
}

pub fn relu_mat<T: Scalar>(m: &Matrix<T>) -> Matrix<T> {
    m.map(relu)
}

/// In-place softmax over a slice, with max subtraction for stability.
/// Entries equal to -inf come out as exact zeros.
pub fn softmax_in_place<T: Scalar>(v: &mut [T]) {
    let max = v.iter().cloned().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        // All entries masked; leave a uniform distribution rather than NaN.
        let u = T::from_f64(1.0 / v.len() as f64);
        for x in v.iter_mut() {
            *x = u;
        }
        return;
    }
    let mut sum = T::zero();
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum = sum + *x;
    }
    for x in v.iter_mut() {
        *x = *x / sum;
    }
}

/// Row-wise log softmax.
pub fn log_softmax_rows<T: Scalar>(m: &Matrix<T>) -> Matrix<T> {
    let mut out = m.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for &x in row.iter() {
            sum = sum + (x - max).exp();
        }
        let lse = max + sum.ln();
        for x in row.iter_mut() {
            *x = *x - lse;
        }
    }
    out
}

/// Index of the largest entry in each row. Ties resolve to the lowest index.
pub fn argmax_rows<T: Scalar>(m: &Matrix<T>) -> Vec<usize> {
    (0..m.rows())
        .map(|r| {
            let row = m.row(r);
            let mut best = 0;
            for (i, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn sigmoid_known_values() {
        assert_relative_eq!(sigmoid(0.0f64), 0.5);
        assert_relative_eq!(sigmoid(2.0f64), 1.0 / (1.0 + (-2.0f64).exp()), epsilon = 1e-15);
        // Saturated tails stay finite and ordered.
        assert!(sigmoid(800.0f64) <= 1.0 && sigmoid(800.0f64) > 0.999);
        assert!(sigmoid(-800.0f64) >= 0.0 && sigmoid(-800.0f64) < 1e-10);
    }

    #[test]
    fn relu_clamps_negatives_only() {
        assert_eq!(relu(-3.0f64), 0.0);
        assert_eq!(relu(0.0f64), 0.0);
        assert_eq!(relu(2.5f64), 2.5);
    }

    #[test]
    fn softmax_handles_masked_and_large_entries() {
        let mut v = vec![1000.0f64, 1001.0, f64::NEG_INFINITY];
        softmax_in_place(&mut v);
        assert_eq!(v[2], 0.0);
        assert_relative_eq!(v[0] + v[1], 1.0, epsilon = 1e-12);
        assert_relative_eq!(v[1] / v[0], std::f64::consts::E, epsilon = 1e-9);
    }

    #[test]
    fn log_softmax_agrees_with_softmax() {
        let m = Matrix::from_vec(1, 3, vec![0.2f64, -1.0, 0.5]).unwrap();
        let ls = log_softmax_rows(&m);
        let mut direct = m.row(0).to_vec();
        softmax_in_place(&mut direct);
        for c in 0..3 {
            assert_relative_eq!(ls.get(0, c).exp(), direct[c], epsilon = 1e-12);
        }
    }

    #[test]
    fn argmax_takes_first_on_ties() {
        let m = Matrix::from_vec(2, 3, vec![1.0f64, 3.0, 3.0, -1.0, -5.0, -0.5]).unwrap();
        assert_eq!(argmax_rows(&m), vec![1, 2]);
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution_and_shift_invariant(
            vals in proptest::collection::vec(-50.0f64..50.0, 1..12),
            shift in -100.0f64..100.0,
        ) {
            let mut a = vals.clone();
            softmax_in_place(&mut a);
            let sum: f64 = a.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(a.iter().all(|&p| (0.0..=1.0).contains(&p)));

            let mut b: Vec<f64> = vals.iter().map(|v| v + shift).collect();
            softmax_in_place(&mut b);
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
