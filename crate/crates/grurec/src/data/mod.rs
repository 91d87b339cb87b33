//! Sequence samples, the JSON Lines dataset format, feature normalization,
//! and batch padding.
//!
//! A dataset file is UTF-8 JSON Lines. Every line holds one sample:
//!
//! ```json
//! {"id": "g1", "label": "swipe", "subject": "s1", "frames": [[0.1, 0.2], [0.3, 0.4]]}
//! ```
//!
//! `frames` is length x features; the feature count is taken from the first
//! line and enforced on the rest. `subject` is optional and only needed for
//! the per-user protocol. `label` may be omitted for prediction inputs.

pub mod augment;
pub mod split;
pub mod synth;

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, Tensor3};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct GestureSample<T> {
    pub id: String,
    pub label: Option<String>,
    pub subject: Option<String>,
    /// Frames as length x features.
    pub frames: Matrix<T>,
}

impl<T: Scalar> GestureSample<T> {
    pub fn len(&self) -> usize {
        self.frames.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.rows() == 0
    }

    pub fn feature_dim(&self) -> usize {
        self.frames.cols()
    }
}

/// A labeled collection with a stable label vocabulary (first-seen order).
#[derive(Debug, Clone)]
pub struct Dataset<T> {
    samples: Vec<GestureSample<T>>,
    labels: Vec<String>,
}

impl<T: Scalar> Dataset<T> {
    /// Build from samples, deriving the vocabulary in first-seen order.
    /// Every sample must be labeled and share one feature dimension.
    pub fn from_samples(samples: Vec<GestureSample<T>>) -> Result<Self> {
        let mut labels: Vec<String> = Vec::new();
        for s in &samples {
            let label = s
                .label
                .as_ref()
                .ok_or_else(|| Error::data(format!("sample {:?} has no label", s.id)))?;
            if !labels.iter().any(|l| l == label) {
                labels.push(label.clone());
            }
        }
        Dataset::with_vocab(samples, labels)
    }

    /// Build against a fixed vocabulary. Used when splitting so subsets
    /// keep the parent's class indexing.
    pub fn with_vocab(samples: Vec<GestureSample<T>>, labels: Vec<String>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::data("dataset has no samples"));
        }
        let dim = samples[0].feature_dim();
        for s in &samples {
            if s.is_empty() {
                return Err(Error::EmptySequence { id: s.id.clone() });
            }
            if s.feature_dim() != dim {
                return Err(Error::DimMismatch { expected: dim, actual: s.feature_dim() });
            }
            if let Some(label) = &s.label {
                if !labels.iter().any(|l| l == label) {
                    return Err(Error::data(format!(
                        "sample {:?} has label {label:?} outside the vocabulary",
                        s.id
                    )));
                }
            }
        }
        Ok(Dataset { samples, labels })
    }

    pub fn samples(&self) -> &[GestureSample<T>] {
        &self.samples
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.samples[0].feature_dim()
    }

    /// Class index of each sample, in order.
    pub fn label_indices(&self) -> Result<Vec<usize>> {
        self.samples
            .iter()
            .map(|s| {
                let label = s
                    .label
                    .as_ref()
                    .ok_or_else(|| Error::data(format!("sample {:?} has no label", s.id)))?;
                self.label_index(label)
                    .ok_or_else(|| Error::data(format!("label {label:?} not in vocabulary")))
            })
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct JsonSample {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    subject: Option<String>,
    frames: Vec<Vec<f64>>,
}

/// Read samples from JSON Lines. Labels are not required here; use
/// `load_dataset` when training or evaluating.
pub fn load_samples<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<GestureSample<T>>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut samples = Vec::new();
    let mut dim: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: JsonSample = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            line: line_no,
            msg: e.to_string(),
        })?;
        if parsed.frames.is_empty() {
            return Err(Error::MalformedLine { line: line_no, msg: "frames is empty".into() });
        }
        let n = *dim.get_or_insert(parsed.frames[0].len());
        if n == 0 {
            return Err(Error::MalformedLine { line: line_no, msg: "frames have 0 features".into() });
        }
        let mut data = Vec::with_capacity(parsed.frames.len() * n);
        for (f, frame) in parsed.frames.iter().enumerate() {
            if frame.len() != n {
                return Err(Error::MalformedLine {
                    line: line_no,
                    msg: format!("frame {f} has {} features, expected {n}", frame.len()),
                });
            }
            for &v in frame {
                if !v.is_finite() {
                    return Err(Error::MalformedLine {
                        line: line_no,
                        msg: format!("frame {f} contains a non-finite value"),
                    });
                }
                data.push(T::from_f64(v));
            }
        }
        samples.push(GestureSample {
            id: parsed.id,
            label: parsed.label,
            subject: parsed.subject,
            frames: Matrix::from_vec(parsed.frames.len(), n, data)?,
        });
    }
    if samples.is_empty() {
        return Err(Error::data(format!("{} contains no samples", path.display())));
    }
    Ok(samples)
}

/// Read a labeled dataset from JSON Lines.
pub fn load_dataset<T: Scalar>(path: impl AsRef<Path>) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let samples = load_samples(path)?;
    for (i, s) in samples.iter().enumerate() {
        if s.label.is_none() {
            return Err(Error::MalformedLine { line: i + 1, msg: "missing label".into() });
        }
    }
    Dataset::from_samples(samples)
}

/// Write samples as JSON Lines, one compact object per line.
pub fn save_samples<T: Scalar>(samples: &[GestureSample<T>], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = std::io::BufWriter::new(file);
    for s in samples {
        let frames: Vec<Vec<f64>> =
            (0..s.len()).map(|r| s.frames.row(r).iter().map(|&v| v.as_f64()).collect()).collect();
        let json = JsonSample {
            id: s.id.clone(),
            label: s.label.clone(),
            subject: s.subject.clone(),
            frames,
        };
        serde_json::to_writer(&mut w, &json)
            .map_err(|e| Error::data(format!("serializing sample {:?}: {e}", s.id)))?;
        w.write_all(b"\n").map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

/// Per-feature mean and standard deviation for z-score normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

impl<T: Scalar> NormStats<T> {
    /// Identity transform (zero mean, unit deviation).
    pub fn identity(dim: usize) -> Self {
        NormStats { mean: vec![T::zero(); dim], std: vec![T::one(); dim] }
    }

    /// Fit over every frame of every sample. Accumulates in f64 regardless
    /// of the run precision. Constant features get deviation 1 so applying
    /// the transform never divides by zero.
    pub fn fit(samples: &[GestureSample<T>]) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::data("no samples to normalize"))?;
        let dim = first.feature_dim();
        let mut count = 0usize;
        let mut sum = vec![0.0f64; dim];
        let mut sum_sq = vec![0.0f64; dim];
        for s in samples {
            if s.feature_dim() != dim {
                return Err(Error::DimMismatch { expected: dim, actual: s.feature_dim() });
            }
            for r in 0..s.len() {
                for (f, &v) in s.frames.row(r).iter().enumerate() {
                    let v = v.as_f64();
                    sum[f] += v;
                    sum_sq[f] += v * v;
                }
                count += 1;
            }
        }
        let n = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std: Vec<f64> = sum_sq
            .iter()
            .zip(mean.iter())
            .map(|(sq, m)| {
                let var = (sq / n - m * m).max(0.0);
                let sd = var.sqrt();
                if sd < 1e-12 {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(NormStats {
            mean: mean.into_iter().map(T::from_f64).collect(),
            std: std.into_iter().map(T::from_f64).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Apply (x - mean) / std to every frame.
    pub fn apply(&self, sample: &GestureSample<T>) -> Result<GestureSample<T>> {
        if sample.feature_dim() != self.dim() {
            return Err(Error::DimMismatch { expected: self.dim(), actual: sample.feature_dim() });
        }
        let frames = Matrix::from_fn(sample.len(), self.dim(), |r, c| {
            (sample.frames.get(r, c) - self.mean[c]) / self.std[c]
        });
        Ok(GestureSample { frames, ..sample.clone() })
    }
}

/// A zero-padded batch ready for the model.
#[derive(Debug, Clone)]
pub struct Batch<T> {
    /// batch x features x padded-length, exact zeros past each length.
    pub data: Tensor3<T>,
    pub lengths: Vec<usize>,
    /// Class index per row. Filler zeros when the batch is unlabeled.
    pub labels: Vec<usize>,
}

/// Pad samples to the longest length in the set.
pub fn pad_batch<T: Scalar>(samples: &[&GestureSample<T>], labels: Vec<usize>) -> Result<Batch<T>> {
    pad_batch_to(samples, labels, 0)
}

/// Pad samples to at least `min_steps` (and at least the longest sample).
/// The extra tail stays all zero; model outputs must not depend on it.
pub fn pad_batch_to<T: Scalar>(
    samples: &[&GestureSample<T>],
    labels: Vec<usize>,
    min_steps: usize,
) -> Result<Batch<T>> {
    if samples.is_empty() {
        return Err(Error::data("cannot build an empty batch"));
    }
    if labels.len() != samples.len() {
        return Err(Error::shape(format!(
            "{} labels for a batch of {}",
            labels.len(),
            samples.len()
        )));
    }
    let dim = samples[0].feature_dim();
    let mut max_len = 0usize;
    for s in samples {
        if s.is_empty() {
            return Err(Error::EmptySequence { id: s.id.clone() });
        }
        if s.feature_dim() != dim {
            return Err(Error::DimMismatch { expected: dim, actual: s.feature_dim() });
        }
        max_len = max_len.max(s.len());
    }
    let steps = max_len.max(min_steps);
    let mut data = Tensor3::zeros(samples.len(), dim, steps);
    for (i, s) in samples.iter().enumerate() {
        for t in 0..s.len() {
            let src = s.frames.row(t);
            data.step_mut(t).row_mut(i).copy_from_slice(src);
        }
    }
    let lengths = samples.iter().map(|s| s.len()).collect();
    Ok(Batch { data, lengths, labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sample(id: &str, label: Option<&str>, frames: Vec<Vec<f64>>) -> GestureSample<f64> {
        let rows = frames.len();
        let cols = frames[0].len();
        let data: Vec<f64> = frames.into_iter().flatten().collect();
        GestureSample {
            id: id.into(),
            label: label.map(String::from),
            subject: None,
            frames: Matrix::from_vec(rows, cols, data).unwrap(),
        }
    }

    #[test]
    fn jsonl_round_trip_preserves_everything() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let mut s1 = sample("a", Some("wave"), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        s1.subject = Some("p1".into());
        let s2 = sample("b", Some("push"), vec![vec![-1.5, 0.25]]);
        save_samples(&[s1.clone(), s2.clone()], &path).unwrap();

        let loaded = load_samples::<f64>(&path).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].id, "a");
        assert_eq!(loaded[0].subject.as_deref(), Some("p1"));
        assert_eq!(loaded[0].frames, s1.frames);
        assert_eq!(loaded[1].label.as_deref(), Some("push"));
        assert_eq!(loaded[1].frames, s2.frames);
    }

    #[test]
    fn loader_reports_line_numbers_for_malformed_input() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            "{\"id\":\"a\",\"label\":\"x\",\"frames\":[[1.0,2.0]]}\nnot json\n",
        )
        .unwrap();
        let err = load_samples::<f64>(&path).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn loader_rejects_ragged_frames_and_non_finite_values() {
        let dir = tempdir().unwrap();
        let ragged = dir.path().join("ragged.jsonl");
        std::fs::write(&ragged, "{\"id\":\"a\",\"frames\":[[1.0,2.0],[1.0]]}\n").unwrap();
        assert!(load_samples::<f64>(&ragged).is_err());

        let nan = dir.path().join("nan.jsonl");
        std::fs::write(&nan, "{\"id\":\"a\",\"frames\":[[1.0,null]]}\n").unwrap();
        assert!(load_samples::<f64>(&nan).is_err());

        let inconsistent = dir.path().join("mix.jsonl");
        std::fs::write(
            &inconsistent,
            "{\"id\":\"a\",\"frames\":[[1.0,2.0]]}\n{\"id\":\"b\",\"frames\":[[1.0,2.0,3.0]]}\n",
        )
        .unwrap();
        assert!(load_samples::<f64>(&inconsistent).is_err());
    }

    #[test]
    fn load_dataset_requires_labels() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("unlabeled.jsonl");
        std::fs::write(&path, "{\"id\":\"a\",\"frames\":[[1.0]]}\n").unwrap();
        assert!(load_dataset::<f64>(&path).is_err());
        assert!(load_samples::<f64>(&path).is_ok());
    }

    #[test]
    fn vocabulary_is_first_seen_order() {
        let ds = Dataset::from_samples(vec![
            sample("a", Some("swipe"), vec![vec![0.0]]),
            sample("b", Some("push"), vec![vec![0.0]]),
            sample("c", Some("swipe"), vec![vec![0.0]]),
        ])
        .unwrap();
        assert_eq!(ds.labels(), &["swipe".to_string(), "push".to_string()]);
        assert_eq!(ds.label_indices().unwrap(), vec![0, 1, 0]);
    }

    #[test]
    fn zscore_fit_standardizes_the_training_frames() {
        let samples = vec![
            sample("a", None, vec![vec![1.0, 10.0], vec![2.0, 20.0]]),
            sample("b", None, vec![vec![3.0, 30.0], vec![4.0, 40.0]]),
        ];
        let stats = NormStats::fit(&samples).unwrap();
        assert!((stats.mean[0] - 2.5).abs() < 1e-12);
        assert!((stats.mean[1] - 25.0).abs() < 1e-12);

        // After applying, pooled frames have zero mean and unit variance.
        let normed: Vec<_> = samples.iter().map(|s| stats.apply(s).unwrap()).collect();
        for f in 0..2 {
            let vals: Vec<f64> = normed
                .iter()
                .flat_map(|s| (0..s.len()).map(move |r| s.frames.get(r, f)))
                .collect();
            let mean: f64 = vals.iter().sum::<f64>() / vals.len() as f64;
            let var: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_features_get_unit_deviation() {
        let samples = vec![sample("a", None, vec![vec![5.0], vec![5.0]])];
        let stats = NormStats::fit(&samples).unwrap();
        assert_eq!(stats.std[0], 1.0);
        let normed = stats.apply(&samples[0]).unwrap();
        assert!(normed.frames.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn padding_zero_fills_past_each_length() {
        let s1 = sample("a", None, vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        let s2 = sample("b", None, vec![vec![7.0, 8.0]]);
        let batch = pad_batch(&[&s1, &s2], vec![0, 1]).unwrap();
        assert_eq!(batch.data.steps(), 3);
        assert_eq!(batch.lengths, vec![3, 1]);
        assert_eq!(batch.data.at(1, 0, 0), 7.0);
        for t in 1..3 {
            for f in 0..2 {
                assert_eq!(batch.data.at(1, f, t), 0.0);
            }
        }

        let padded = pad_batch_to(&[&s1, &s2], vec![0, 1], 10).unwrap();
        assert_eq!(padded.data.steps(), 10);
        assert_eq!(padded.lengths, vec![3, 1]);
    }

    #[test]
    fn batch_construction_rejects_bad_input() {
        let s1 = sample("a", None, vec![vec![1.0, 2.0]]);
        let s3 = sample("c", None, vec![vec![1.0, 2.0, 3.0]]);
        assert!(pad_batch::<f64>(&[], vec![]).is_err());
        assert!(pad_batch(&[&s1], vec![0, 1]).is_err());
        assert!(pad_batch(&[&s1, &s3], vec![0, 1]).is_err());
    }
}
