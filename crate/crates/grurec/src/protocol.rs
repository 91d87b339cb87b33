//! The per-participant small-training-set protocol: for every subject,
//! train a fresh model on T of their samples per class and test on the
//! rest of that subject's samples, then average accuracy across subjects.

use serde::Serialize;

use crate::data::split::split_user_dependent;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{build_model, ModelConfig};
use crate::optim::metrics::evaluate;
use crate::optim::train::{train, TrainConfig};
use crate::rng::{Purpose, SeededRng};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Serialize)]
pub struct ParticipantReport {
    pub subject: String,
    pub train_size: usize,
    pub test_size: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProtocolReport {
    pub t: usize,
    pub participants: Vec<ParticipantReport>,
    pub mean_accuracy: f64,
}

/// Run the protocol. `template` supplies the architecture; its input
/// dimension and class count are overwritten from the data. Each
/// participant gets a fresh model drawn from a per-participant stream, so
/// runs are reproducible and participants independent.
pub fn run_protocol_t<T: Scalar>(
    data: &Dataset<T>,
    t: usize,
    template: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<ProtocolReport> {
    let splits = split_user_dependent(data, t, cfg.seed)?;
    if splits.is_empty() {
        return Err(Error::data("no subjects found in the dataset"));
    }
    let mut config = template.clone();
    config.input_dim = data.feature_dim();
    config.num_classes = data.labels().len();
    config.validate()?;

    let mut participants = Vec::with_capacity(splits.len());
    let mut total = 0.0f64;
    for (si, split) in splits.iter().enumerate() {
        let mut rng = SeededRng::derive(cfg.seed, Purpose::Init, 0, si as u64);
        let mut model = build_model::<T>(config.clone(), &mut rng)?;
        // No validation file here: the tiny per-subject training sets fall
        // back to validating on themselves, and the held-out samples stay
        // untouched until the final evaluation.
        train(&mut model, &split.train, None, cfg)?;
        let metrics = evaluate(&model, &split.test)?;
        total += metrics.accuracy;
        participants.push(ParticipantReport {
            subject: split.subject.clone(),
            train_size: split.train.len(),
            test_size: split.test.len(),
            accuracy: metrics.accuracy,
        });
    }
    let mean_accuracy = total / participants.len() as f64;
    Ok(ProtocolReport { t, participants, mean_accuracy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::synth_generate_subjects;

    fn quick_cfg() -> TrainConfig {
        TrainConfig {
            batch_size: 16,
            max_epochs: 6,
            patience: 6,
            augment: None,
            ..TrainConfig::default()
        }
    }

    fn small_template(dim: usize, classes: usize) -> ModelConfig {
        let mut c = ModelConfig::new(dim, classes);
        c.encoder_widths = vec![10, 8];
        c.dropout_rate = 0.0;
        c
    }

    #[test]
    fn covers_every_subject_with_exact_sizes() {
        let data = synth_generate_subjects::<f32>(3, 3, 4, 3, 41).unwrap();
        let report =
            run_protocol_t(&data, 2, &small_template(3, 3), &quick_cfg()).unwrap();
        assert_eq!(report.t, 2);
        assert_eq!(report.participants.len(), 3);
        for p in &report.participants {
            assert_eq!(p.train_size, 6, "2 per class, 3 classes");
            assert_eq!(p.test_size, 6);
            assert!((0.0..=1.0).contains(&p.accuracy));
        }
        let mean: f64 =
            report.participants.iter().map(|p| p.accuracy).sum::<f64>() / 3.0;
        assert!((report.mean_accuracy - mean).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_report() {
        let data = synth_generate_subjects::<f32>(2, 2, 3, 3, 43).unwrap();
        let template = small_template(3, 2);
        let a = run_protocol_t(&data, 1, &template, &quick_cfg()).unwrap();
        let b = run_protocol_t(&data, 1, &template, &quick_cfg()).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn too_few_samples_per_class_is_an_error() {
        // t equals the per-class count, leaving nothing to test on.
        let data = synth_generate_subjects::<f32>(2, 2, 2, 3, 47).unwrap();
        assert!(run_protocol_t(&data, 2, &small_template(3, 2), &quick_cfg()).is_err());
    }
}
