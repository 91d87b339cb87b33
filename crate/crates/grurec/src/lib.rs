//! Recurrent gesture and action recognition on the CPU.
//!
//! The model is a stack of unidirectional GRUs followed by a global
//! attention block and a small batch-normalized classifier, trained
//! end to end with Adam on variable-length feature sequences. Everything
//! here, including the backward passes, is written out explicitly; there
//! is no autodiff graph.
//!
//! Start with the `examples/` directory: each major capability (training,
//! gradient checking, padding invariance, augmentation, the per-user
//! evaluation protocol, checkpoint round-trips) has a runnable example.

pub mod cli;
pub mod data;
pub mod error;
pub mod grad;
pub mod gradcheck;
pub mod layers;
pub mod manifest;
pub mod matrix;
pub mod model;
pub mod ops;
pub mod optim;
pub mod protocol;
pub mod rng;
pub mod scalar;

#[cfg(test)]
pub(crate) mod testkit;

pub use error::{Error, Result};
pub use matrix::{Matrix, Tensor3};
pub use rng::{Purpose, SeededRng};
pub use scalar::Scalar;
