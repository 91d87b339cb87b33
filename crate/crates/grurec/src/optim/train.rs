//! The training loop: shuffled mini-batches, optional augmentation, Adam
//! updates, per-epoch validation, and early stopping on validation accuracy.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::augment::{augment_sample, AugmentSpec};
use crate::data::split::stratified_holdout;
use crate::data::{pad_batch, Dataset, GestureSample, NormStats};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::ops::argmax_rows;
use crate::optim::metrics::evaluate;
use crate::optim::{AdamConfig, AdamState};
use crate::rng::{Purpose, SeededRng};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(flatten)]
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many consecutive epochs without a new best
    /// validation accuracy.
    pub patience: usize,
    pub seed: u64,
    /// None disables augmentation entirely.
    pub augment: Option<AugmentSpec>,
    /// With more than one thread, per-sample augmentation runs on the rayon
    /// pool. Streams are indexed per (epoch, sample), so results do not
    /// depend on the schedule.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            batch_size: 128,
            max_epochs: 500,
            patience: 50,
            seed: 42,
            augment: Some(AugmentSpec::default()),
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::config(
                "batch size must be at least 2 (batch normalization needs batch statistics)",
            ));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("max epochs must be at least 1"));
        }
        if self.patience == 0 {
            return Err(Error::config("patience must be at least 1"));
        }
        if self.threads == 0 {
            return Err(Error::config("thread count must be at least 1"));
        }
        let a = &self.adam;
        if !a.lr.is_finite() || a.lr < 0.0 {
            return Err(Error::config(format!("learning rate must be finite and >= 0, got {}", a.lr)));
        }
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) {
            return Err(Error::config("adam betas must lie in [0, 1)"));
        }
        if !(a.eps > 0.0) {
            return Err(Error::config("adam epsilon must be positive"));
        }
        if !a.weight_decay.is_finite() || a.weight_decay < 0.0 {
            return Err(Error::config("weight decay must be finite and >= 0"));
        }
        if let Some(spec) = &self.augment {
            spec.validate()?;
        }
        Ok(())
    }
}

/// One line of the training history. `elapsed_s` is wall-clock time and is
/// the only field that varies between otherwise identical runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    /// 1-based epoch whose weights the model now carries.
    pub best_epoch: usize,
    pub best_val_acc: f64,
}

/// Train in place. When `val` is None a stratified 10% holdout is carved
/// out of `train_data`; if the dataset is too small even for that, the
/// training set doubles as validation. On return the model carries the
/// weights of the best validation epoch.
pub fn train<T: Scalar>(
    model: &mut Model<T>,
    train_data: &Dataset<T>,
    val: Option<&Dataset<T>>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with(model, train_data, val, cfg, |_| {})
}

/// `train` with a per-epoch callback, for progress reporting.
pub fn train_with<T: Scalar>(
    model: &mut Model<T>,
    train_data: &Dataset<T>,
    val: Option<&Dataset<T>>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_data.labels().len() != model.config.num_classes {
        return Err(Error::config(format!(
            "model expects {} classes but the training set has {}",
            model.config.num_classes,
            train_data.labels().len()
        )));
    }
    if train_data.feature_dim() != model.config.input_dim {
        return Err(Error::DimMismatch {
            expected: model.config.input_dim,
            actual: train_data.feature_dim(),
        });
    }
    model.set_labels(train_data.labels().to_vec())?;

    let (train_set, val_set): (Dataset<T>, Dataset<T>) = match val {
        Some(v) => (train_data.clone(), v.clone()),
        None => {
            let (tr, held) = stratified_holdout(train_data, 0.1, cfg.seed)?;
            match held {
                Some(v) => (tr, v),
                // Too small to hold anything out; validation accuracy then
                // measures the training set.
                None => (tr.clone(), tr),
            }
        }
    };
    if train_set.len() < 2 {
        return Err(Error::config("need at least 2 training samples"));
    }

    model.norm_stats = NormStats::fit(train_set.samples())?;
    let normalized: Vec<GestureSample<T>> = train_set
        .samples()
        .iter()
        .map(|s| model.norm_stats.apply(s))
        .collect::<Result<_>>()?;
    let label_ids = train_set.label_indices()?;

    let mut adam = AdamState::new(&model.trainable_tensors());
    let mut history: Vec<EpochRecord> = Vec::new();
    let mut best: Option<(usize, f64, Model<T>)> = None;
    let mut since_best = 0usize;

    for epoch in 0..cfg.max_epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..normalized.len()).collect();
        SeededRng::derive(cfg.seed, Purpose::Shuffle, epoch as u64, 0).shuffle(&mut order);

        let mut loss_sum = 0.0f64;
        let mut seen = 0usize;
        let mut correct = 0usize;
        let mut step = 0u64;
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < 2 {
                // Orphan tail; batch statistics need at least two rows.
                continue;
            }
            let augmented: Option<Vec<GestureSample<T>>> = match &cfg.augment {
                Some(spec) => {
                    let make = |&i: &usize| {
                        let mut rng =
                            SeededRng::derive(cfg.seed, Purpose::Augment, epoch as u64, i as u64);
                        augment_sample(&normalized[i], spec, &mut rng)
                    };
                    Some(if cfg.threads > 1 {
                        chunk.par_iter().map(make).collect::<Result<_>>()?
                    } else {
                        chunk.iter().map(make).collect::<Result<_>>()?
                    })
                }
                None => None,
            };
            let refs: Vec<&GestureSample<T>> = match &augmented {
                Some(v) => v.iter().collect(),
                None => chunk.iter().map(|&i| &normalized[i]).collect(),
            };
            let labels: Vec<usize> = chunk.iter().map(|&i| label_ids[i]).collect();
            let batch = pad_batch(&refs, labels)?;

            let mut drop_rng = SeededRng::derive(cfg.seed, Purpose::Dropout, epoch as u64, step);
            let (loss, grads, cache, logits) = model.loss_and_grads(&batch, &mut drop_rng)?;
            if !loss.as_f64().is_finite() {
                return Err(Error::Diverged { epoch: epoch + 1 });
            }
            {
                let flat = grads.flatten();
                let mut params = model.trainable_tensors_mut();
                adam.step(&cfg.adam, &mut params, &flat)?;
            }
            model.commit_batch_stats(&cache);

            let n = batch.labels.len();
            loss_sum += loss.as_f64() * n as f64;
            seen += n;
            correct += argmax_rows(&logits)
                .iter()
                .zip(&batch.labels)
                .filter(|(p, l)| p == l)
                .count();
            step += 1;
        }
        if seen == 0 {
            return Err(Error::config("no usable training batches; check batch size"));
        }

        let val_metrics = evaluate(model, &val_set)?;
        let record = EpochRecord {
            epoch: epoch + 1,
            train_loss: loss_sum / seen as f64,
            train_acc: correct as f64 / seen as f64,
            val_acc: val_metrics.accuracy,
            elapsed_s: started.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        history.push(record);

        let improved = best
            .as_ref()
            .map_or(true, |(_, acc, _)| val_metrics.accuracy > *acc);
        if improved {
            best = Some((epoch + 1, val_metrics.accuracy, model.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }

    let (best_epoch, best_val_acc, best_model) =
        best.expect("at least one epoch ran");
    *model = best_model;
    Ok(TrainOutcome { history, best_epoch, best_val_acc })
}
