//! Evaluation: accuracy, per-class breakdown, confusion matrix, mean loss.

use serde::Serialize;

use crate::data::{pad_batch, Dataset};
use crate::error::{Error, Result};
use crate::layers::loss::cross_entropy;
use crate::model::Model;
use crate::ops::argmax_rows;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Serialize)]
pub struct ClassReport {
    pub label: String,
    pub support: usize,
    pub correct: usize,
    /// 0.0 when the class has no samples in the evaluated set.
    pub accuracy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Metrics {
    pub accuracy: f64,
    #[serde(rename = "loss")]
    pub mean_loss: f64,
    pub per_class: Vec<ClassReport>,
    /// confusion[truth][prediction], indexed by class id.
    pub confusion: Vec<Vec<usize>>,
}

/// Aggregate already-computed predictions. `mean_loss` is passed through
/// untouched so callers without a loss can supply NaN-free 0.0.
pub fn metrics_from_predictions(
    truth: &[usize],
    predicted: &[usize],
    labels: &[String],
    mean_loss: f64,
) -> Result<Metrics> {
    if truth.len() != predicted.len() {
        return Err(Error::shape(format!(
            "{} truth labels vs {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::data("no predictions to score"));
    }
    let c = labels.len();
    let mut confusion = vec![vec![0usize; c]; c];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= c || p >= c {
            return Err(Error::data(format!(
                "class id out of range: truth {t}, predicted {p}, {c} classes"
            )));
        }
        confusion[t][p] += 1;
    }
    let mut per_class = Vec::with_capacity(c);
    let mut correct_total = 0usize;
    for (i, label) in labels.iter().enumerate() {
        let support: usize = confusion[i].iter().sum();
        let correct = confusion[i][i];
        correct_total += correct;
        let accuracy = if support == 0 { 0.0 } else { correct as f64 / support as f64 };
        per_class.push(ClassReport { label: label.clone(), support, correct, accuracy });
    }
    Ok(Metrics {
        accuracy: correct_total as f64 / truth.len() as f64,
        mean_loss,
        per_class,
        confusion,
    })
}

/// Score a dataset against a trained model. Normalization uses the model's
/// stored statistics; dataset labels are mapped through the model's own
/// vocabulary, so class ids line up even if the dataset saw labels in a
/// different order.
pub fn evaluate<T: Scalar>(model: &Model<T>, data: &Dataset<T>) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::data("cannot evaluate an empty dataset"));
    }
    let mut truth = Vec::with_capacity(data.len());
    for s in data.samples() {
        let label = s
            .label
            .as_deref()
            .ok_or_else(|| Error::data(format!("sample {} has no label", s.id)))?;
        let idx = model
            .labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::data(format!("label {label:?} unknown to the model")))?;
        truth.push(idx);
    }

    let mut predicted = Vec::with_capacity(data.len());
    let mut loss_sum = 0.0f64;
    let mut n = 0usize;
    for (chunk, chunk_truth) in data.samples().chunks(64).zip(truth.chunks(64)) {
        let normed = chunk
            .iter()
            .map(|s| model.norm_stats.apply(s))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<_> = normed.iter().collect();
        let batch = pad_batch(&refs, chunk_truth.to_vec())?;
        let logits = model.forward_eval(&batch)?;
        let (loss, _) = cross_entropy(&logits, &batch.labels)?;
        loss_sum += loss.as_f64() * chunk.len() as f64;
        n += chunk.len();
        predicted.extend(argmax_rows(&logits));
    }

    metrics_from_predictions(&truth, &predicted, &model.labels, loss_sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::synth_generate;
    use crate::data::augment::augment_count;
    use crate::model::{build_model, ModelConfig};
    use crate::rng::SeededRng;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn perfect_and_worst_case() {
        let t = vec![0, 1, 2, 0];
        let m = metrics_from_predictions(&t, &t, &labels(3), 0.1).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.mean_loss, 0.1);
        assert!(m.per_class.iter().all(|c| c.accuracy == 1.0 || c.support == 0));

        let wrong = vec![1, 2, 0, 1];
        let m = metrics_from_predictions(&t, &wrong, &labels(3), 0.0).unwrap();
        assert_eq!(m.accuracy, 0.0);
        for (i, row) in m.confusion.iter().enumerate() {
            assert_eq!(row[i], 0);
        }
    }

    #[test]
    fn confusion_matrix_counts() {
        let truth = vec![0, 0, 1, 1, 1];
        let pred = vec![0, 1, 1, 1, 0];
        let m = metrics_from_predictions(&truth, &pred, &labels(2), 0.0).unwrap();
        assert_eq!(m.confusion, vec![vec![1, 1], vec![1, 2]]);
        assert_eq!(m.per_class[0].support, 2);
        assert_eq!(m.per_class[1].correct, 2);
        assert!((m.accuracy - 0.6).abs() < 1e-12);
    }

    #[test]
    fn random_predictor_scores_near_chance() {
        // Monte-Carlo check of the aggregation itself: a uniform random
        // predictor over 10 balanced classes must land close to 0.1.
        let c = 10usize;
        let n = 10_000usize;
        let mut rng = SeededRng::new(99);
        let truth: Vec<usize> = (0..n).map(|i| i % c).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.below(c)).collect();
        let m = metrics_from_predictions(&truth, &pred, &labels(c), 0.0).unwrap();
        assert!(
            (0.08..=0.12).contains(&m.accuracy),
            "random predictor accuracy {} outside [0.08, 0.12]",
            m.accuracy
        );
        let total: usize = m.confusion.iter().flatten().sum();
        assert_eq!(total, n);
        // Row sums are the per-class truth counts.
        for row in &m.confusion {
            assert_eq!(row.iter().sum::<usize>(), n / c);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(metrics_from_predictions(&[0], &[0, 1], &labels(2), 0.0).is_err());
        assert!(metrics_from_predictions(&[], &[], &labels(2), 0.0).is_err());
        assert!(metrics_from_predictions(&[5], &[0], &labels(2), 0.0).is_err());
    }

    #[test]
    fn evaluate_maps_labels_and_counts_everything() {
        let (train, _) = synth_generate(3, 4, 1, 5, 11).unwrap();
        let mut config = ModelConfig::new(5, 3);
        config.encoder_widths = vec![8, 6];
        let mut model = build_model::<f32>(config, &mut SeededRng::new(3)).unwrap();
        // Reversed vocabulary: evaluate must follow the model's order.
        let mut vocab: Vec<String> = train.labels().to_vec();
        vocab.reverse();
        model.set_labels(vocab).unwrap();

        let before = augment_count();
        let m = evaluate(&model, &train).unwrap();
        // Evaluation never augments.
        assert_eq!(augment_count(), before);
        let total: usize = m.confusion.iter().flatten().sum();
        assert_eq!(total, train.len());
        assert!(m.mean_loss.is_finite());
        let support: Vec<usize> = m.per_class.iter().map(|c| c.support).collect();
        assert_eq!(support, vec![4, 4, 4]);
    }

    #[test]
    fn evaluate_rejects_unknown_label() {
        let (train, _) = synth_generate(2, 2, 1, 4, 1).unwrap();
        let mut config = ModelConfig::new(4, 2);
        config.encoder_widths = vec![6];
        let mut model = build_model::<f32>(config, &mut SeededRng::new(1)).unwrap();
        model.set_labels(vec!["x".into(), "y".into()]).unwrap();
        assert!(evaluate(&model, &train).is_err());
    }
}
