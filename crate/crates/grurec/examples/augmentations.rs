//! Show each training-time augmentation on a concrete sample: random
//! per-axis scaling, random translation, and stochastic resampling that
//! changes the sequence length while keeping the trajectory shape.
//!
//!     cargo run --release --example augmentations

use grurec::data::augment::{augment_sample, gpsr, AugmentSpec, GpsrSpec};
use grurec::data::GestureSample;
use grurec::matrix::Matrix;
use grurec::rng::{Purpose, SeededRng};

fn ramp(steps: usize, dim: usize) -> GestureSample<f64> {
    let frames = Matrix::from_fn(steps, dim, |t, d| t as f64 + 0.1 * d as f64);
    GestureSample { id: "ramp".into(), label: None, subject: None, frames }
}

fn main() -> grurec::Result<()> {
    let sample = ramp(12, 3);
    let mut rng = SeededRng::derive(7, Purpose::Augment, 0, 0);

    // Affine only: every feature is scaled by one factor from [0.7, 1.3]
    // and shifted by one offset from [-1, 1], constant over time.
    let affine = AugmentSpec {
        scale_factor: 0.3,
        translate_factor: 1.0,
        rotate_factor: None,
        gpsr: None,
        point_layout: false,
    };
    let out = augment_sample(&sample, &affine, &mut rng)?;
    println!("affine keeps length: {} -> {}", sample.len(), out.len());
    for d in 0..3 {
        let slope = out.frames.get(11, d) - out.frames.get(10, d);
        let offset = out.frames.get(0, d) - slope * (0.1 * d as f64);
        println!("  axis {d}: scale {slope:.4}, shift {offset:+.4}");
    }

    // Resampling redraws the length around the original and drops a few
    // interior points before interpolating back onto a uniform grid.
    let resampled = gpsr(&sample, 17, 1, &mut rng)?;
    println!("gpsr to n=17: length {}", resampled.len());

    // The full spec applies both stages; lengths now vary draw to draw.
    let full = AugmentSpec { gpsr: Some(GpsrSpec::default()), ..affine };
    let mut lengths = Vec::new();
    for i in 0..10 {
        let mut r = SeededRng::derive(7, Purpose::Augment, 1, i);
        lengths.push(augment_sample(&sample, &full, &mut r)?.len());
    }
    println!("full augmentation lengths over 10 draws: {lengths:?}");
    Ok(())
}
