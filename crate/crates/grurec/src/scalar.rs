//! Floating point abstraction so the whole pipeline can run in either f32
//! (training default) or f64 (gradient verification).

use num_traits::Float;

pub trait Scalar:
    Float
    + std::fmt::Debug
    + std::fmt::Display
    + std::iter::Sum
    + Default
    + Send
    + Sync
    + serde::Serialize
    + 'static
{
    const NAME: &'static str;

    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";

    fn from_f64(v: f64) -> Self {
        v as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";

    fn from_f64(v: f64) -> Self {
        v
    }

    fn as_f64(self) -> f64 {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum_generic<T: Scalar>(xs: &[f64]) -> f64 {
        xs.iter().map(|&x| T::from_f64(x)).fold(T::zero(), |a, b| a + b).as_f64()
    }

    #[test]
    fn both_precisions_round_trip() {
        let xs = [0.5, -1.25, 3.0];
        assert_eq!(sum_generic::<f64>(&xs), 2.25);
        assert_eq!(sum_generic::<f32>(&xs), 2.25);
        assert_eq!(f32::NAME, "f32");
        assert_eq!(f64::NAME, "f64");
    }
}
