//! Training-time augmentation.
//!
//! All of it runs on already normalized frames and only during training:
//! uniform per-axis scaling, constant-in-time translation, optional yaw
//! rotation for 3D point layouts, and gesture path stochastic resampling
//! (GPSR), which redistributes the frames along the trajectory's arc
//! length and drops a few of them to vary the apparent speed.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::SeededRng;
use crate::scalar::Scalar;

use super::GestureSample;

/// How many samples have gone through `augment_sample` since process start.
/// Evaluation paths assert this stays flat while they run.
static AUGMENT_APPLICATIONS: AtomicU64 = AtomicU64::new(0);

pub fn augment_count() -> u64 {
    AUGMENT_APPLICATIONS.load(Ordering::Relaxed)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GpsrSpec {
    /// Output length varies by +-`n_factor` around the input length.
    pub n_factor: f64,
    /// Up to `r_factor` of the length is resampled away.
    pub r_factor: f64,
}

impl Default for GpsrSpec {
    fn default() -> Self {
        GpsrSpec { n_factor: 0.1, r_factor: 0.05 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AugmentSpec {
    /// Per-axis scale drawn from [1 - f, 1 + f].
    pub scale_factor: f64,
    /// Per-axis offset drawn from [-f, +f], constant over time.
    pub translate_factor: f64,
    /// Yaw angle bound in radians. Requires `point_layout`.
    pub rotate_factor: Option<f64>,
    pub gpsr: Option<GpsrSpec>,
    /// Interpret features as consecutive (x, y, z) triples. Scaling and
    /// translation then draw one factor per spatial axis instead of one
    /// per feature.
    pub point_layout: bool,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        AugmentSpec {
            scale_factor: 0.3,
            translate_factor: 1.0,
            rotate_factor: None,
            gpsr: Some(GpsrSpec::default()),
            point_layout: false,
        }
    }
}

impl AugmentSpec {
    /// No-op spec; augment_sample returns the input unchanged (but still
    /// counts the application).
    pub fn none() -> Self {
        AugmentSpec {
            scale_factor: 0.0,
            translate_factor: 0.0,
            rotate_factor: None,
            gpsr: None,
            point_layout: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.scale_factor) {
            return Err(Error::config(format!(
                "scale factor must be in [0, 1) so scales stay positive, got {}",
                self.scale_factor
            )));
        }
        if self.translate_factor < 0.0 || !self.translate_factor.is_finite() {
            return Err(Error::config(format!(
                "translate factor must be non-negative, got {}",
                self.translate_factor
            )));
        }
        if let Some(rot) = self.rotate_factor {
            if !self.point_layout {
                return Err(Error::config(
                    "rotation requires a 3D point layout (enable point_layout)",
                ));
            }
            if rot < 0.0 || !rot.is_finite() {
                return Err(Error::config(format!("rotation bound must be non-negative, got {rot}")));
            }
        }
        if let Some(g) = &self.gpsr {
            if !(0.0..1.0).contains(&g.n_factor) || !(0.0..1.0).contains(&g.r_factor) {
                return Err(Error::config(format!(
                    "gpsr factors must be in [0, 1), got n={} r={}",
                    g.n_factor, g.r_factor
                )));
            }
        }
        Ok(())
    }
}

/// Scale, translate, and optionally rotate. Draw order is fixed: rotation
/// angle, then scales, then offsets, so a given stream always produces the
/// same transform.
pub fn augment_affine<T: Scalar>(
    sample: &GestureSample<T>,
    spec: &AugmentSpec,
    rng: &mut SeededRng,
) -> Result<GestureSample<T>> {
    spec.validate()?;
    let dim = sample.feature_dim();
    if spec.point_layout && dim % 3 != 0 {
        return Err(Error::config(format!(
            "point layout needs a feature count divisible by 3, got {dim}"
        )));
    }

    let angle = match spec.rotate_factor {
        Some(bound) => rng.uniform(-bound, bound),
        None => 0.0,
    };
    let axes = if spec.point_layout { 3 } else { dim };
    let scales: Vec<f64> = (0..axes)
        .map(|_| rng.uniform(1.0 - spec.scale_factor, 1.0 + spec.scale_factor))
        .collect();
    let offsets: Vec<f64> = (0..axes)
        .map(|_| rng.uniform(-spec.translate_factor, spec.translate_factor))
        .collect();

    let (sin_a, cos_a) = angle.sin_cos();
    let frames = Matrix::from_fn(sample.len(), dim, |r, c| {
        let axis = if spec.point_layout { c % 3 } else { c };
        let mut v = sample.frames.get(r, c).as_f64();
        if spec.rotate_factor.is_some() {
            // Yaw about the third axis: mixes x and y, leaves z alone.
            let base = c - axis;
            let x = sample.frames.get(r, base).as_f64();
            let y = sample.frames.get(r, base + 1).as_f64();
            v = match axis {
                0 => x * cos_a - y * sin_a,
                1 => x * sin_a + y * cos_a,
                _ => v,
            };
        }
        T::from_f64(v * scales[axis] + offsets[axis])
    });
    Ok(GestureSample { frames, ..sample.clone() })
}

/// Resample along the trajectory with a fixed plan. `fractions` are sorted
/// positions in [0, 1] of the full arc length, the first being 0;
/// `remove` lists indices into that resampled path (never 0) to drop.
pub(crate) fn gpsr_with_plan<T: Scalar>(
    sample: &GestureSample<T>,
    fractions: &[f64],
    remove: &[usize],
) -> Result<GestureSample<T>> {
    let len = sample.len();
    let dim = sample.feature_dim();
    if len < 2 {
        return Ok(sample.clone());
    }
    if fractions.is_empty() || fractions[0] != 0.0 {
        return Err(Error::config("resampling plan must start at arc position 0"));
    }
    if remove.contains(&0) {
        return Err(Error::config("resampling must keep the first point"));
    }

    // Cumulative arc length over frames treated as points in feature space.
    let mut cum = Vec::with_capacity(len);
    cum.push(0.0f64);
    for r in 1..len {
        let prev = sample.frames.row(r - 1);
        let cur = sample.frames.row(r);
        let seg: f64 = prev
            .iter()
            .zip(cur.iter())
            .map(|(&a, &b)| {
                let d = (b - a).as_f64();
                d * d
            })
            .sum::<f64>()
            .sqrt();
        cum.push(cum[r - 1] + seg);
    }
    let total = cum[len - 1];

    let mut resampled = Matrix::zeros(fractions.len(), dim);
    let mut seg = 0usize;
    for (k, &f) in fractions.iter().enumerate() {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::config(format!("arc fraction {f} outside [0, 1]")));
        }
        if total == 0.0 {
            // Degenerate path: every point coincides.
            resampled.row_mut(k).copy_from_slice(sample.frames.row(0));
            continue;
        }
        let target = f * total;
        while seg + 2 < len && cum[seg + 1] < target {
            seg += 1;
        }
        let span = cum[seg + 1] - cum[seg];
        let w = if span > 0.0 { ((target - cum[seg]) / span).clamp(0.0, 1.0) } else { 0.0 };
        let a = sample.frames.row(seg);
        let b = sample.frames.row(seg + 1);
        let dst = resampled.row_mut(k);
        for (i, d) in dst.iter_mut().enumerate() {
            *d = a[i] + T::from_f64(w) * (b[i] - a[i]);
        }
    }

    let mut keep: Vec<usize> = (0..fractions.len()).filter(|i| !remove.contains(i)).collect();
    keep.sort_unstable();
    let frames = Matrix::from_fn(keep.len(), dim, |r, c| resampled.get(keep[r], c));
    Ok(GestureSample { frames, ..sample.clone() })
}

/// Stochastic resampling to exactly `n` output frames: synthesize n + r
/// points at random arc positions, then discard r of them (never the
/// first).
pub fn gpsr<T: Scalar>(
    sample: &GestureSample<T>,
    n: usize,
    r: usize,
    rng: &mut SeededRng,
) -> Result<GestureSample<T>> {
    if n < 2 {
        return Err(Error::config(format!("gpsr needs at least 2 output points, got {n}")));
    }
    if sample.len() < 2 {
        return Ok(sample.clone());
    }
    let m = n + r;
    let mut fractions = Vec::with_capacity(m);
    fractions.push(0.0);
    for _ in 1..m {
        fractions.push(rng.uniform(0.0, 1.0));
    }
    fractions[1..].sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());

    // Choose r distinct victims among indices 1..m.
    let mut candidates: Vec<usize> = (1..m).collect();
    let mut remove = Vec::with_capacity(r);
    for _ in 0..r {
        let pick = rng.below(candidates.len());
        remove.push(candidates.swap_remove(pick));
    }
    gpsr_with_plan(sample, &fractions, &remove)
}

/// Full augmentation for one training sample: affine transform, then
/// optional stochastic resampling with the output length drawn around the
/// input length.
pub fn augment_sample<T: Scalar>(
    sample: &GestureSample<T>,
    spec: &AugmentSpec,
    rng: &mut SeededRng,
) -> Result<GestureSample<T>> {
    AUGMENT_APPLICATIONS.fetch_add(1, Ordering::Relaxed);
    spec.validate()?;
    let affine = augment_affine(sample, spec, rng)?;
    match &spec.gpsr {
        None => Ok(affine),
        Some(g) => {
            let len = affine.len() as f64;
            let n_lo = (len * (1.0 - g.n_factor)).round().max(2.0);
            let n_hi = (len * (1.0 + g.n_factor)).round().max(n_lo);
            let n = n_lo + rng.uniform(0.0, 1.0) * (n_hi - n_lo);
            let n = n.round() as usize;
            let r_hi = (len * g.r_factor).floor() as usize;
            let r = if r_hi == 0 { 0 } else { rng.below(r_hi + 1) };
            gpsr(&affine, n.max(2), r, rng)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_sample(rows: usize, cols: usize, value: f64) -> GestureSample<f64> {
        GestureSample {
            id: "t".into(),
            label: None,
            subject: None,
            frames: Matrix::from_fn(rows, cols, |_, _| value),
        }
    }

    fn line_sample(xs: &[f64]) -> GestureSample<f64> {
        // A straight 2D path along the x axis.
        GestureSample {
            id: "line".into(),
            label: None,
            subject: None,
            frames: Matrix::from_fn(xs.len(), 2, |r, c| if c == 0 { xs[r] } else { 0.0 }),
        }
    }

    #[test]
    fn scales_stay_inside_the_configured_band() {
        let spec = AugmentSpec { translate_factor: 0.0, gpsr: None, ..Default::default() };
        let ones = flat_sample(1, 4, 1.0);
        for i in 0..1000 {
            let mut rng = SeededRng::derive(5, crate::rng::Purpose::Augment, 0, i);
            let out = augment_affine(&ones, &spec, &mut rng).unwrap();
            for &v in out.frames.data() {
                assert!((0.7..=1.3).contains(&v), "scale {v} escaped [0.7, 1.3]");
            }
        }
    }

    #[test]
    fn translation_is_constant_over_time_and_bounded() {
        let spec = AugmentSpec { scale_factor: 0.0, gpsr: None, ..Default::default() };
        let zeros = flat_sample(6, 3, 0.0);
        let mut rng = SeededRng::new(8);
        let out = augment_affine(&zeros, &spec, &mut rng).unwrap();
        for c in 0..3 {
            let first = out.frames.get(0, c);
            assert!((-1.0..=1.0).contains(&first));
            for r in 1..6 {
                assert_eq!(out.frames.get(r, c), first, "offset drifted over time");
            }
        }
    }

    #[test]
    fn rotation_preserves_z_and_planar_radius() {
        let spec = AugmentSpec {
            scale_factor: 0.0,
            translate_factor: 0.0,
            rotate_factor: Some(std::f64::consts::FRAC_PI_4),
            gpsr: None,
            point_layout: true,
        };
        let sample = GestureSample::<f64> {
            id: "p".into(),
            label: None,
            subject: None,
            frames: Matrix::from_vec(2, 6, vec![1.0, 2.0, 3.0, -1.0, 0.5, 2.0, 0.0, 1.0, -4.0, 2.0, 2.0, 0.0]).unwrap(),
        };
        let mut rng = SeededRng::new(17);
        let out = augment_affine(&sample, &spec, &mut rng).unwrap();
        for r in 0..2 {
            for p in 0..2 {
                let (x0, y0, z0) =
                    (sample.frames.get(r, 3 * p), sample.frames.get(r, 3 * p + 1), sample.frames.get(r, 3 * p + 2));
                let (x1, y1, z1) =
                    (out.frames.get(r, 3 * p), out.frames.get(r, 3 * p + 1), out.frames.get(r, 3 * p + 2));
                assert_eq!(z1, z0, "rotation touched the vertical axis");
                let r0 = (x0 * x0 + y0 * y0).sqrt();
                let r1 = (x1 * x1 + y1 * y1).sqrt();
                assert!((r0 - r1).abs() < 1e-12, "planar radius changed");
            }
        }
    }

    #[test]
    fn rotation_without_point_layout_is_a_config_error() {
        let spec = AugmentSpec {
            rotate_factor: Some(0.5),
            point_layout: false,
            ..AugmentSpec::none()
        };
        assert_eq!(spec.validate().unwrap_err().exit_code(), 2);

        let spec = AugmentSpec {
            rotate_factor: Some(0.5),
            point_layout: true,
            scale_factor: 0.0,
            translate_factor: 0.0,
            gpsr: None,
        };
        let sample = flat_sample(2, 4, 1.0);
        let mut rng = SeededRng::new(1);
        assert!(augment_affine(&sample, &spec, &mut rng).is_err(), "dim 4 is not triples");
    }

    #[test]
    fn augmentation_is_deterministic_per_stream() {
        let spec = AugmentSpec::default();
        let sample = line_sample(&[0.0, 1.0, 3.0, 7.0, 8.0, 10.0]);
        let run = |idx| {
            let mut rng = SeededRng::derive(9, crate::rng::Purpose::Augment, 2, idx);
            augment_sample(&sample, &spec, &mut rng).unwrap().frames
        };
        assert_eq!(run(4), run(4));
        assert_ne!(run(4), run(5));
    }

    #[test]
    fn equal_fraction_resampling_matches_linear_interpolation() {
        // Points along a straight line with uneven spacing. Arc-length
        // resampling at k/(m-1) fractions must land at evenly spaced x.
        let sample = line_sample(&[0.0, 0.5, 4.0, 4.5, 10.0]);
        let m = 6;
        let fractions: Vec<f64> = (0..m).map(|k| k as f64 / (m - 1) as f64).collect();
        let out = gpsr_with_plan(&sample, &fractions, &[]).unwrap();
        assert_eq!(out.len(), m);
        for (k, &f) in fractions.iter().enumerate() {
            let expected_x = 10.0 * f;
            assert!(
                (out.frames.get(k, 0) - expected_x).abs() < 1e-9,
                "point {k}: {} vs {expected_x}",
                out.frames.get(k, 0)
            );
            assert_eq!(out.frames.get(k, 1), 0.0);
        }
    }

    #[test]
    fn gpsr_emits_exactly_n_frames_and_keeps_the_start() {
        let sample = line_sample(&[0.0, 1.0, 2.0, 5.0, 6.0, 9.0, 12.0, 13.0]);
        for (n, r) in [(8usize, 0usize), (6, 3), (10, 2), (2, 5)] {
            let mut rng = SeededRng::derive(3, crate::rng::Purpose::Augment, 1, (n * 100 + r) as u64);
            let out = gpsr(&sample, n, r, &mut rng).unwrap();
            assert_eq!(out.len(), n, "n={n} r={r}");
            assert_eq!(out.frames.get(0, 0), 0.0, "first point moved");
            assert!(out.frames.is_all_finite());
        }
    }

    #[test]
    fn degenerate_paths_resample_to_the_same_point() {
        let sample = flat_sample(5, 3, 2.5);
        let mut rng = SeededRng::new(2);
        let out = gpsr(&sample, 4, 1, &mut rng).unwrap();
        assert_eq!(out.len(), 4);
        assert!(out.frames.data().iter().all(|&v| v == 2.5));

        let single = flat_sample(1, 3, 1.0);
        let mut rng = SeededRng::new(2);
        let out = gpsr(&single, 4, 0, &mut rng).unwrap();
        assert_eq!(out.len(), 1, "single-frame samples pass through");
    }

    #[test]
    fn full_pipeline_output_stays_valid() {
        let spec = AugmentSpec::default();
        let sample = line_sample(&[0.0, 2.0, 3.0, 7.0, 11.0, 12.0, 15.0, 18.0, 20.0, 22.0]);
        for i in 0..200 {
            let mut rng = SeededRng::derive(11, crate::rng::Purpose::Augment, 0, i);
            let out = augment_sample(&sample, &spec, &mut rng).unwrap();
            assert!(out.frames.is_all_finite());
            assert_eq!(out.feature_dim(), 2);
            assert!(out.len() >= 2);
            let lo = (10.0 * 0.9f64).round() as usize;
            let hi = (10.0 * 1.1f64).round() as usize;
            assert!((lo..=hi).contains(&out.len()), "length {} outside [{lo}, {hi}]", out.len());
        }
    }

    #[test]
    fn the_application_counter_ticks() {
        let before = augment_count();
        let sample = flat_sample(3, 2, 1.0);
        let mut rng = SeededRng::new(4);
        augment_sample(&sample, &AugmentSpec::none(), &mut rng).unwrap();
        assert_eq!(augment_count(), before + 1);
    }
}
