//! The full recognizer: stacked GRU encoder, optional global attention,
//! and a batch-normalized two-stage classifier.
//!
//! Data flow for a padded batch X (batch x features x steps):
//!
//!   encoder:    X -> GRU_1 -> ... -> GRU_k  (per-step states H, final h_last)
//!   attention:  [context ; aux context] from H and h_last, or h_last alone
//!   classifier: BN -> dropout -> FC -> ReLU -> BN -> dropout -> FC -> logits
//!
//! With `fc_count = 1` the classifier is BN -> dropout -> FC. Training and
//! gradient code live here; the optimizer is in `optim`.

pub mod checkpoint;

use serde::{Deserialize, Serialize};

use crate::data::{Batch, GestureSample, NormStats};
use crate::error::{Error, Result};
use crate::layers::attention::{
    attention_backward, attention_forward, AttentionCache, AttentionGrads, AttentionParams,
};
use crate::layers::batchnorm::{BatchNormGrads, BatchNormParams, BnCache};
use crate::layers::dense::{DenseGrads, DenseParams};
use crate::layers::dropout::{dropout_backward, dropout_forward, DropoutCache};
use crate::layers::gru::{
    gru_layer_backward, gru_layer_forward, GruGrads, GruLayerCache, GruParams,
};
use crate::layers::loss::cross_entropy;
use crate::layers::Mode;
use crate::matrix::{Matrix, Tensor3};
use crate::ops::{argmax_rows, relu_mat, softmax_in_place};
use crate::rng::SeededRng;
use crate::scalar::Scalar;

pub const DEFAULT_ENCODER_WIDTHS: [usize; 5] = [512, 512, 256, 256, 128];

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub num_classes: usize,
    /// Hidden width of each stacked GRU, input to output.
    pub encoder_widths: Vec<usize>,
    pub use_attention: bool,
    /// Number of fully connected classifier stages, 1 or 2.
    pub fc_count: usize,
    /// Width of the first classifier stage (unused when fc_count is 1).
    pub fc_width: usize,
    pub dropout_rate: f64,
}

impl ModelConfig {
    pub fn new(input_dim: usize, num_classes: usize) -> Self {
        ModelConfig {
            input_dim,
            num_classes,
            encoder_widths: DEFAULT_ENCODER_WIDTHS.to_vec(),
            use_attention: true,
            fc_count: 2,
            fc_width: 256,
            dropout_rate: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::config("input dimension must be positive"));
        }
        if self.num_classes < 2 {
            return Err(Error::config(format!(
                "need at least 2 classes, got {}",
                self.num_classes
            )));
        }
        if self.encoder_widths.is_empty() || self.encoder_widths.iter().any(|&w| w == 0) {
            return Err(Error::config("encoder widths must be a non-empty list of positive sizes"));
        }
        if !(self.fc_count == 1 || self.fc_count == 2) {
            return Err(Error::config(format!("fc_count must be 1 or 2, got {}", self.fc_count)));
        }
        if self.fc_count == 2 && self.fc_width == 0 {
            return Err(Error::config("fc_width must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config(format!(
                "dropout rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    pub fn encoder_out_dim(&self) -> usize {
        *self.encoder_widths.last().expect("validated non-empty")
    }

    /// Width of the vector entering the classifier.
    pub fn classifier_input_dim(&self) -> usize {
        if self.use_attention {
            2 * self.encoder_out_dim()
        } else {
            self.encoder_out_dim()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Model<T> {
    pub config: ModelConfig,
    /// Class names, indexed by class id. Length always equals num_classes.
    pub labels: Vec<String>,
    pub norm_stats: NormStats<T>,
    pub encoder: Vec<GruParams<T>>,
    pub attention: Option<AttentionParams<T>>,
    pub bn1: BatchNormParams<T>,
    pub fc1: Option<DenseParams<T>>,
    pub bn2: Option<BatchNormParams<T>>,
    pub fc2: DenseParams<T>,
}

#[derive(Debug, Clone)]
pub struct ModelGrads<T> {
    pub encoder: Vec<GruGrads<T>>,
    pub attention: Option<AttentionGrads<T>>,
    pub bn1: BatchNormGrads<T>,
    pub fc1: Option<DenseGrads<T>>,
    pub bn2: Option<BatchNormGrads<T>>,
    pub fc2: DenseGrads<T>,
}

pub struct ForwardCache<T> {
    enc_caches: Vec<GruLayerCache<T>>,
    h_all_top: Tensor3<T>,
    attn_cache: Option<AttentionCache<T>>,
    bn1_cache: BnCache<T>,
    drop1: DropoutCache<T>,
    fc1_input: Option<Matrix<T>>,
    relu_input: Option<Matrix<T>>,
    bn2_cache: Option<BnCache<T>>,
    drop2: Option<DropoutCache<T>>,
    fc2_input: Matrix<T>,
}

impl<T: Scalar> ForwardCache<T> {
    /// Attention weights of this pass, if the model uses attention.
    pub fn attention_weights(&self) -> Option<&Matrix<T>> {
        self.attn_cache.as_ref().map(|c| c.weights())
    }
}

/// Build a freshly initialized model. The same seed stream yields the same
/// parameters at either precision.
pub fn build_model<T: Scalar>(config: ModelConfig, rng: &mut SeededRng) -> Result<Model<T>> {
    config.validate()?;
    let mut encoder = Vec::with_capacity(config.encoder_widths.len());
    let mut in_dim = config.input_dim;
    for &width in &config.encoder_widths {
        encoder.push(GruParams::init(in_dim, width, rng));
        in_dim = width;
    }
    let attention = if config.use_attention {
        Some(AttentionParams::init(config.encoder_out_dim(), rng))
    } else {
        None
    };
    let cls_in = config.classifier_input_dim();
    let bn1 = BatchNormParams::init(cls_in);
    let (fc1, bn2, fc2) = if config.fc_count == 2 {
        (
            Some(DenseParams::init(cls_in, config.fc_width, rng)),
            Some(BatchNormParams::init(config.fc_width)),
            DenseParams::init(config.fc_width, config.num_classes, rng),
        )
    } else {
        (None, None, DenseParams::init(cls_in, config.num_classes, rng))
    };
    let labels = (0..config.num_classes).map(|i| i.to_string()).collect();
    Ok(Model {
        norm_stats: NormStats::identity(config.input_dim),
        labels,
        config,
        encoder,
        attention,
        bn1,
        fc1,
        bn2,
        fc2,
    })
}

/// One predicted sample: class id, label name, softmax probabilities.
#[derive(Debug, Clone, Serialize)]
pub struct Prediction {
    pub class_index: usize,
    pub label: String,
    pub probs: Vec<f64>,
}

impl<T: Scalar> Model<T> {
    /// Replace the label vocabulary. Must match the class count.
    pub fn set_labels(&mut self, labels: Vec<String>) -> Result<()> {
        if labels.len() != self.config.num_classes {
            return Err(Error::data(format!(
                "model has {} classes but {} labels were supplied",
                self.config.num_classes,
                labels.len()
            )));
        }
        self.labels = labels;
        Ok(())
    }

    fn run_forward(
        &self,
        batch: &Batch<T>,
        mode: Mode,
        mut rng: Option<&mut SeededRng>,
    ) -> Result<(Matrix<T>, ForwardCache<T>)> {
        if batch.data.rows() != self.config.input_dim {
            return Err(Error::DimMismatch {
                expected: self.config.input_dim,
                actual: batch.data.rows(),
            });
        }
        if mode == Mode::Train && rng.is_none() {
            return Err(Error::config("training forward pass needs an rng for dropout"));
        }

        let mut enc_caches = Vec::with_capacity(self.encoder.len());
        let mut seq: Option<Tensor3<T>> = None;
        let mut h_last = Matrix::zeros(0, 0);
        for layer in &self.encoder {
            let input = seq.as_ref().unwrap_or(&batch.data);
            let (h_all, hl, cache) = gru_layer_forward(layer, input, &batch.lengths)?;
            enc_caches.push(cache);
            seq = Some(h_all);
            h_last = hl;
        }
        let h_all_top = seq.expect("encoder has at least one layer");

        let (cls_in, attn_cache) = match &self.attention {
            Some(p) => {
                let (o, c) = attention_forward(p, &h_all_top, &h_last, &batch.lengths)?;
                (o, Some(c))
            }
            None => (h_last, None),
        };

        let rate = self.config.dropout_rate;
        let (z, bn1_cache) = self.bn1.forward(&cls_in, mode)?;
        let (z, drop1) = dropout_forward(&z, rate, mode, rng.as_deref_mut())?;

        let (logits, fc1_input, relu_input, bn2_cache, drop2, fc2_input);
        match (&self.fc1, &self.bn2) {
            (Some(fc1), Some(bn2)) => {
                let (a, fc1_x) = fc1.forward(&z)?;
                let activated = relu_mat(&a);
                let (z2, bn2_c) = bn2.forward(&activated, mode)?;
                let (z2, drop2_c) = dropout_forward(&z2, rate, mode, rng.as_deref_mut())?;
                let (out, fc2_x) = self.fc2.forward(&z2)?;
                logits = out;
                fc1_input = Some(fc1_x);
                relu_input = Some(a);
                bn2_cache = Some(bn2_c);
                drop2 = Some(drop2_c);
                fc2_input = fc2_x;
            }
            _ => {
                let (out, fc2_x) = self.fc2.forward(&z)?;
                logits = out;
                fc1_input = None;
                relu_input = None;
                bn2_cache = None;
                drop2 = None;
                fc2_input = fc2_x;
            }
        }

        Ok((
            logits,
            ForwardCache {
                enc_caches,
                h_all_top,
                attn_cache,
                bn1_cache,
                drop1,
                fc1_input,
                relu_input,
                bn2_cache,
                drop2,
                fc2_input,
            },
        ))
    }

    /// Training forward pass: batch statistics, dropout active.
    pub fn forward_train(
        &self,
        batch: &Batch<T>,
        rng: &mut SeededRng,
    ) -> Result<(Matrix<T>, ForwardCache<T>)> {
        self.run_forward(batch, Mode::Train, Some(rng))
    }

    /// Inference forward pass: running statistics, no randomness.
    pub fn forward_eval(&self, batch: &Batch<T>) -> Result<Matrix<T>> {
        Ok(self.run_forward(batch, Mode::Eval, None)?.0)
    }

    /// Backward through the whole model given d(loss)/d(logits).
    pub fn backward(&self, cache: &ForwardCache<T>, d_logits: &Matrix<T>) -> Result<ModelGrads<T>> {
        let (d, fc2_grads) = self.fc2.backward(&cache.fc2_input, d_logits)?;
        let mut d = d;

        let (fc1_grads, bn2_grads) = match (&self.fc1, &self.bn2) {
            (Some(fc1), Some(bn2)) => {
                let d_after_drop2 = dropout_backward(cache.drop2.as_ref().expect("fc2 cache"), &d)?;
                let (d_act, bn2_g) =
                    bn2.backward(cache.bn2_cache.as_ref().expect("bn2 cache"), &d_after_drop2)?;
                let relu_in = cache.relu_input.as_ref().expect("relu cache");
                let d_pre = d_act.zip_map(relu_in, |g, a| if a > T::zero() { g } else { T::zero() })?;
                let (d_z, fc1_g) = fc1.backward(cache.fc1_input.as_ref().expect("fc1 cache"), &d_pre)?;
                d = d_z;
                (Some(fc1_g), Some(bn2_g))
            }
            _ => (None, None),
        };

        let d_after_drop1 = dropout_backward(&cache.drop1, &d)?;
        let (d_cls_in, bn1_grads) = self.bn1.backward(&cache.bn1_cache, &d_after_drop1)?;

        let b = d_cls_in.rows();
        let h_top = self.config.encoder_out_dim();
        let steps = cache.h_all_top.steps();
        let (mut d_h_all, mut d_h_last, attn_grads) = match &self.attention {
            Some(p) => {
                let (d_all, d_last, g) =
                    attention_backward(p, cache.attn_cache.as_ref().expect("attention cache"), &cache.h_all_top, &d_cls_in)?;
                (d_all, d_last, Some(g))
            }
            None => (Tensor3::zeros(b, h_top, steps), d_cls_in, None),
        };

        let mut encoder_grads: Vec<GruGrads<T>> = Vec::with_capacity(self.encoder.len());
        for (layer, layer_cache) in self.encoder.iter().zip(&cache.enc_caches).rev() {
            let (dx, g) = gru_layer_backward(layer, layer_cache, &d_h_all, &d_h_last)?;
            encoder_grads.push(g);
            d_h_all = dx;
            d_h_last = Matrix::zeros(b, layer.input_dim());
        }
        encoder_grads.reverse();

        Ok(ModelGrads {
            encoder: encoder_grads,
            attention: attn_grads,
            bn1: bn1_grads,
            fc1: fc1_grads,
            bn2: bn2_grads,
            fc2: fc2_grads,
        })
    }

    /// Adopt the running statistics proposed by a training forward pass.
    pub fn commit_batch_stats(&mut self, cache: &ForwardCache<T>) {
        self.bn1.commit_running(&cache.bn1_cache);
        if let (Some(bn2), Some(c)) = (&mut self.bn2, &cache.bn2_cache) {
            bn2.commit_running(c);
        }
    }

    /// Classify raw (unnormalized) samples. Normalization with the model's
    /// stored statistics happens here.
    pub fn predict_many(&self, samples: &[GestureSample<T>]) -> Result<Vec<Prediction>> {
        let mut out = Vec::with_capacity(samples.len());
        for chunk in samples.chunks(64) {
            let normed: Vec<GestureSample<T>> =
                chunk.iter().map(|s| self.norm_stats.apply(s)).collect::<Result<_>>()?;
            let refs: Vec<&GestureSample<T>> = normed.iter().collect();
            let batch = crate::data::pad_batch(&refs, vec![0; refs.len()])?;
            let logits = self.forward_eval(&batch)?;
            for i in 0..logits.rows() {
                let mut probs: Vec<f64> = logits.row(i).iter().map(|&v| v.as_f64()).collect();
                softmax_in_place(&mut probs);
                let class_index = argmax_rows(&logits)[i];
                out.push(Prediction {
                    class_index,
                    label: self.labels[class_index].clone(),
                    probs,
                });
            }
        }
        Ok(out)
    }

    pub fn predict(&self, sample: &GestureSample<T>) -> Result<Prediction> {
        Ok(self.predict_many(std::slice::from_ref(sample))?.remove(0))
    }

    /// Trainable tensors in canonical order. Matches `ModelGrads::flatten`.
    pub fn trainable_tensors(&self) -> Vec<&Matrix<T>> {
        let mut v: Vec<&Matrix<T>> = Vec::new();
        for layer in &self.encoder {
            v.extend(layer.tensors());
        }
        if let Some(attn) = &self.attention {
            v.push(&attn.w_c);
            v.extend(attn.gru.tensors());
        }
        v.push(&self.bn1.gamma);
        v.push(&self.bn1.beta);
        if let Some(fc1) = &self.fc1 {
            v.push(&fc1.w);
            v.push(&fc1.b);
        }
        if let Some(bn2) = &self.bn2 {
            v.push(&bn2.gamma);
            v.push(&bn2.beta);
        }
        v.push(&self.fc2.w);
        v.push(&self.fc2.b);
        v
    }

    pub fn trainable_tensors_mut(&mut self) -> Vec<&mut Matrix<T>> {
        let mut v: Vec<&mut Matrix<T>> = Vec::new();
        for layer in &mut self.encoder {
            v.extend(layer.tensors_mut());
        }
        if let Some(attn) = &mut self.attention {
            v.push(&mut attn.w_c);
            v.extend(attn.gru.tensors_mut());
        }
        v.push(&mut self.bn1.gamma);
        v.push(&mut self.bn1.beta);
        if let Some(fc1) = &mut self.fc1 {
            v.push(&mut fc1.w);
            v.push(&mut fc1.b);
        }
        if let Some(bn2) = &mut self.bn2 {
            v.push(&mut bn2.gamma);
            v.push(&mut bn2.beta);
        }
        v.push(&mut self.fc2.w);
        v.push(&mut self.fc2.b);
        v
    }

    /// All tensors with stable names, including batch norm running
    /// statistics. This is the checkpoint manifest order.
    pub fn named_tensors(&self) -> Vec<(String, &Matrix<T>)> {
        let mut v: Vec<(String, &Matrix<T>)> = Vec::new();
        for (i, layer) in self.encoder.iter().enumerate() {
            for (name, m) in GruParams::<T>::tensor_names().iter().zip(layer.tensors()) {
                v.push((format!("enc{i}.{name}"), m));
            }
        }
        if let Some(attn) = &self.attention {
            v.push(("attn.w_c".into(), &attn.w_c));
            for (name, m) in GruParams::<T>::tensor_names().iter().zip(attn.gru.tensors()) {
                v.push((format!("attn.gru.{name}"), m));
            }
        }
        for (prefix, bn) in [("bn1", Some(&self.bn1)), ("bn2", self.bn2.as_ref())] {
            if let Some(bn) = bn {
                v.push((format!("{prefix}.gamma"), &bn.gamma));
                v.push((format!("{prefix}.beta"), &bn.beta));
                v.push((format!("{prefix}.running_mean"), &bn.running_mean));
                v.push((format!("{prefix}.running_var"), &bn.running_var));
            }
        }
        if let Some(fc1) = &self.fc1 {
            v.push(("fc1.w".into(), &fc1.w));
            v.push(("fc1.b".into(), &fc1.b));
        }
        v.push(("fc2.w".into(), &self.fc2.w));
        v.push(("fc2.b".into(), &self.fc2.b));
        v
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Matrix<T>)> {
        let mut v: Vec<(String, &mut Matrix<T>)> = Vec::new();
        for (i, layer) in self.encoder.iter_mut().enumerate() {
            for (name, m) in GruParams::<T>::tensor_names().iter().zip(layer.tensors_mut()) {
                v.push((format!("enc{i}.{name}"), m));
            }
        }
        if let Some(attn) = &mut self.attention {
            v.push(("attn.w_c".into(), &mut attn.w_c));
            for (name, m) in GruParams::<T>::tensor_names().iter().zip(attn.gru.tensors_mut()) {
                v.push((format!("attn.gru.{name}"), m));
            }
        }
        for (prefix, bn) in [("bn1", Some(&mut self.bn1)), ("bn2", self.bn2.as_mut())] {
            if let Some(bn) = bn {
                v.push((format!("{prefix}.gamma"), &mut bn.gamma));
                v.push((format!("{prefix}.beta"), &mut bn.beta));
                v.push((format!("{prefix}.running_mean"), &mut bn.running_mean));
                v.push((format!("{prefix}.running_var"), &mut bn.running_var));
            }
        }
        if let Some(fc1) = &mut self.fc1 {
            v.push(("fc1.w".into(), &mut fc1.w));
            v.push(("fc1.b".into(), &mut fc1.b));
        }
        v.push(("fc2.w".into(), &mut self.fc2.w));
        v.push(("fc2.b".into(), &mut self.fc2.b));
        v
    }

    /// Number of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.trainable_tensors().iter().map(|m| m.rows() * m.cols()).sum()
    }

    /// Convenience: loss and gradients for one batch in training mode.
    pub fn loss_and_grads(
        &self,
        batch: &Batch<T>,
        rng: &mut SeededRng,
    ) -> Result<(T, ModelGrads<T>, ForwardCache<T>, Matrix<T>)> {
        let (logits, cache) = self.forward_train(batch, rng)?;
        let (loss, d_logits) = cross_entropy(&logits, &batch.labels)?;
        let grads = self.backward(&cache, &d_logits)?;
        Ok((loss, grads, cache, logits))
    }
}

impl<T: Scalar> ModelGrads<T> {
    /// Same order as `Model::trainable_tensors`.
    pub fn flatten(&self) -> Vec<&Matrix<T>> {
        let mut v: Vec<&Matrix<T>> = Vec::new();
        for g in &self.encoder {
            v.extend(g.tensors());
        }
        if let Some(attn) = &self.attention {
            v.push(&attn.w_c);
            v.extend(attn.gru.tensors());
        }
        v.push(&self.bn1.gamma);
        v.push(&self.bn1.beta);
        if let Some(fc1) = &self.fc1 {
            v.push(&fc1.w);
            v.push(&fc1.b);
        }
        if let Some(bn2) = &self.bn2 {
            v.push(&bn2.gamma);
            v.push(&bn2.beta);
        }
        v.push(&self.fc2.w);
        v.push(&self.fc2.b);
        v
    }
}

impl<T: Scalar> GruParams<T> {
    pub fn tensor_names() -> [&'static str; 12] {
        ["w_xr", "w_xu", "w_xc", "w_hr", "w_hu", "w_hc", "b_xr", "b_xu", "b_xc", "b_hr", "b_hu", "b_hc"]
    }

    pub fn tensors(&self) -> [&Matrix<T>; 12] {
        [
            &self.w_xr, &self.w_xu, &self.w_xc, &self.w_hr, &self.w_hu, &self.w_hc, &self.b_xr,
            &self.b_xu, &self.b_xc, &self.b_hr, &self.b_hu, &self.b_hc,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Matrix<T>; 12] {
        [
            &mut self.w_xr, &mut self.w_xu, &mut self.w_xc, &mut self.w_hr, &mut self.w_hu,
            &mut self.w_hc, &mut self.b_xr, &mut self.b_xu, &mut self.b_xc, &mut self.b_hr,
            &mut self.b_hu, &mut self.b_hc,
        ]
    }
}

impl<T: Scalar> GruGrads<T> {
    pub fn tensors(&self) -> [&Matrix<T>; 12] {
        [
            &self.w_xr, &self.w_xu, &self.w_xc, &self.w_hr, &self.w_hu, &self.w_hc, &self.b_xr,
            &self.b_xu, &self.b_xc, &self.b_hr, &self.b_hu, &self.b_hc,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::pad_batch;

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            encoder_widths: vec![8, 6],
            fc_width: 10,
            dropout_rate: 0.25,
            ..ModelConfig::new(4, 3)
        }
    }

    fn tiny_batch(seed: u64) -> Batch<f64> {
        let mut rng = SeededRng::new(seed);
        let samples: Vec<GestureSample<f64>> = (0..3)
            .map(|i| GestureSample {
                id: format!("s{i}"),
                label: None,
                subject: None,
                frames: Matrix::random_uniform(3 + i, 4, -1.0, 1.0, &mut rng),
            })
            .collect();
        let refs: Vec<&GestureSample<f64>> = samples.iter().collect();
        pad_batch(&refs, vec![0, 1, 2]).unwrap()
    }

    #[test]
    fn default_model_lands_in_the_expected_parameter_budget() {
        let mut rng = SeededRng::new(1);
        let model = build_model::<f32>(ModelConfig::new(63, 14), &mut rng).unwrap();
        assert_eq!(model.param_count(), 3_782_414);
        assert!((3_700_000..=3_900_000).contains(&model.param_count()));
    }

    #[test]
    fn parameter_count_drops_without_attention_or_second_stage() {
        let mut rng = SeededRng::new(1);
        let full = build_model::<f32>(ModelConfig::new(63, 14), &mut rng).unwrap();

        let mut rng = SeededRng::new(1);
        let no_attn = build_model::<f32>(
            ModelConfig { use_attention: false, ..ModelConfig::new(63, 14) },
            &mut rng,
        )
        .unwrap();
        // Attention itself plus the halved classifier input.
        assert!(no_attn.param_count() < full.param_count() - 115_000);

        let mut rng = SeededRng::new(1);
        let one_fc = build_model::<f32>(
            ModelConfig { fc_count: 1, ..ModelConfig::new(63, 14) },
            &mut rng,
        )
        .unwrap();
        assert!(one_fc.param_count() < full.param_count());
    }

    #[test]
    fn build_is_seed_deterministic() {
        let a = build_model::<f64>(tiny_config(), &mut SeededRng::new(5)).unwrap();
        let b = build_model::<f64>(tiny_config(), &mut SeededRng::new(5)).unwrap();
        let c = build_model::<f64>(tiny_config(), &mut SeededRng::new(6)).unwrap();
        for (x, y) in a.trainable_tensors().iter().zip(b.trainable_tensors()) {
            assert_eq!(*x, y);
        }
        let differs = a
            .trainable_tensors()
            .iter()
            .zip(c.trainable_tensors())
            .any(|(x, y)| *x != y);
        assert!(differs);
    }

    #[test]
    fn eval_forward_is_deterministic_and_shaped() {
        let model = build_model::<f64>(tiny_config(), &mut SeededRng::new(7)).unwrap();
        let batch = tiny_batch(8);
        let a = model.forward_eval(&batch).unwrap();
        let b = model.forward_eval(&batch).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.shape(), (3, 3));
        assert!(a.is_all_finite());
    }

    #[test]
    fn dropout_separates_train_from_eval() {
        let mut cfg = tiny_config();
        cfg.dropout_rate = 0.7;
        let model = build_model::<f64>(cfg, &mut SeededRng::new(9)).unwrap();
        let batch = tiny_batch(10);
        let eval = model.forward_eval(&batch).unwrap();
        let (train, _) = model.forward_train(&batch, &mut SeededRng::new(11)).unwrap();
        assert_ne!(eval, train);
    }

    #[test]
    fn gradient_layout_matches_parameter_layout() {
        for cfg in [
            tiny_config(),
            ModelConfig { use_attention: false, ..tiny_config() },
            ModelConfig { fc_count: 1, ..tiny_config() },
        ] {
            let model = build_model::<f64>(cfg, &mut SeededRng::new(12)).unwrap();
            let batch = tiny_batch(13);
            let (_, grads, _, _) = model.loss_and_grads(&batch, &mut SeededRng::new(14)).unwrap();
            let params = model.trainable_tensors();
            let flat = grads.flatten();
            assert_eq!(params.len(), flat.len());
            for (p, g) in params.iter().zip(flat.iter()) {
                assert_eq!(p.shape(), g.shape());
            }
        }
    }

    #[test]
    fn checkpoint_manifest_names_are_unique_and_cover_everything() {
        let model = build_model::<f64>(tiny_config(), &mut SeededRng::new(15)).unwrap();
        let names: Vec<String> = model.named_tensors().into_iter().map(|(n, _)| n).collect();
        let mut dedup = names.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), names.len(), "duplicate tensor names");
        // Trainables plus 4 running stat tensors per batch norm.
        assert_eq!(names.len(), model.trainable_tensors().len() + 4);
    }

    #[test]
    fn predictions_name_the_right_label_and_sum_to_one() {
        let mut model = build_model::<f64>(tiny_config(), &mut SeededRng::new(16)).unwrap();
        model.set_labels(vec!["wave".into(), "push".into(), "pull".into()]).unwrap();
        let mut rng = SeededRng::new(17);
        let sample = GestureSample {
            id: "x".into(),
            label: None,
            subject: None,
            frames: Matrix::random_uniform(6, 4, -1.0, 1.0, &mut rng),
        };
        let p = model.predict(&sample).unwrap();
        assert_eq!(p.label, model.labels[p.class_index]);
        let sum: f64 = p.probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert_eq!(p.probs.len(), 3);

        // Wrong feature count surfaces as a dimension error.
        let bad = GestureSample {
            id: "y".into(),
            label: None,
            subject: None,
            frames: Matrix::random_uniform(6, 5, -1.0, 1.0, &mut rng),
        };
        let err = model.predict(&bad).unwrap_err();
        assert!(matches!(err, Error::DimMismatch { expected: 4, actual: 5 }));
    }

    #[test]
    fn committing_batch_stats_changes_running_statistics() {
        let mut model = build_model::<f64>(tiny_config(), &mut SeededRng::new(18)).unwrap();
        let batch = tiny_batch(19);
        let before = model.bn1.running_mean.clone();
        let (_, _, cache, _) = model.loss_and_grads(&batch, &mut SeededRng::new(20)).unwrap();
        model.commit_batch_stats(&cache);
        assert_ne!(model.bn1.running_mean, before);
    }

    #[test]
    fn set_labels_enforces_class_count() {
        let mut model = build_model::<f64>(tiny_config(), &mut SeededRng::new(21)).unwrap();
        assert!(model.set_labels(vec!["a".into(), "b".into()]).is_err());
        assert!(model.set_labels(vec!["a".into(), "b".into(), "c".into()]).is_ok());
    }
}
