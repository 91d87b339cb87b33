//! Layer building blocks. Each layer exposes an explicit forward that
//! returns a cache of whatever the matching backward needs.

pub mod attention;
pub mod batchnorm;
pub mod dense;
pub mod dropout;
pub mod gru;
pub mod loss;

/// Whether a forward pass is part of training or inference. Training mode
/// activates dropout and batch statistics; eval mode uses running statistics
/// and applies no randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}
