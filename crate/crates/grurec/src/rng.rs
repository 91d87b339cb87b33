//! Deterministic random number generation.
//!
//! Every source of randomness in the crate is a ChaCha8 stream derived from
//! the run seed plus a purpose key. Keying streams by (purpose, epoch, index)
//! means per-sample augmentation noise does not depend on iteration order,
//! which keeps runs reproducible and makes unit tests cheap to pin down.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What a derived stream is used for. Each purpose gets disjoint randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Init,
    Shuffle,
    Augment,
    Dropout,
    Split,
    Synth,
    GradCheck,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Init => 1,
            Purpose::Shuffle => 2,
            Purpose::Augment => 3,
            Purpose::Dropout => 4,
            Purpose::Split => 5,
            Purpose::Synth => 6,
            Purpose::GradCheck => 7,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Seeded ChaCha8 generator. Construct one per independent use site.
#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng { inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Derive the stream for (purpose, epoch, index) under a run seed.
    pub fn derive(seed: u64, purpose: Purpose, epoch: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stream = splitmix64(purpose.tag() ^ splitmix64(epoch ^ splitmix64(index)));
        rng.set_stream(stream);
        SeededRng { inner: rng }
    }

    /// Uniform draw in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        debug_assert!(hi >= lo);
        let u = (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        lo + u * (hi - lo)
    }

    /// Uniform integer in [0, n). n must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Modulo bias is negligible for the small n used here, but rejection
        // sampling is cheap enough to do it right.
        let bound = n as u64;
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let v = self.inner.next_u64();
            if v < zone {
                return (v % bound) as usize;
            }
        }
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}
