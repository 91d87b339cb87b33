//! Finite-difference verification of every analytic gradient in the crate.
//!
//! Each component is checked in f64 against central differences on a scalar
//! projection of its output, covering parameters and inputs alike. The
//! `fault` hook deliberately corrupts one analytic gradient so the harness
//! can prove it would catch a wrong derivative.

use serde::Serialize;

use crate::data::Batch;
use crate::error::{Error, Result};
use crate::grad::{finite_diff_grad, relative_error};
use crate::layers::attention::{attention_backward, attention_forward, AttentionParams};
use crate::layers::batchnorm::BatchNormParams;
use crate::layers::dense::DenseParams;
use crate::layers::dropout::{dropout_backward, dropout_forward};
use crate::layers::gru::{gru_layer_backward, gru_layer_forward, GruParams};
use crate::layers::loss::cross_entropy;
use crate::layers::Mode;
use crate::matrix::{Matrix, Tensor3};
use crate::model::{build_model, ModelConfig};
use crate::rng::{Purpose, SeededRng};

pub const COMPONENTS: [&str; 8] = [
    "dense",
    "batchnorm",
    "dropout",
    "gru_cell",
    "gru_layer",
    "attention",
    "cross_entropy",
    "model",
];

pub const TOLERANCE: f64 = 1e-4;
const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Serialize)]
pub struct ComponentReport {
    pub component: String,
    pub checked: usize,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub seed: u64,
    pub components: Vec<ComponentReport>,
    pub passed: bool,
}

type LossFn = Box<dyn FnMut(&[f64]) -> Result<f64>>;

/// A check point: flattened inputs, the analytic gradient at that point,
/// and the scalar loss as a function of the flattened inputs.
struct Check {
    x0: Vec<f64>,
    analytic: Vec<f64>,
    loss: LossFn,
}

fn pack(mats: &[&Matrix<f64>]) -> Vec<f64> {
    mats.iter().flat_map(|m| m.data().iter().copied()).collect()
}

fn unpack_into(flat: &[f64], mats: &mut [&mut Matrix<f64>]) {
    let mut offset = 0;
    for m in mats {
        let d = m.data_mut();
        d.copy_from_slice(&flat[offset..offset + d.len()]);
        offset += d.len();
    }
    assert_eq!(offset, flat.len(), "flat vector does not match tensor shapes");
}

fn dot(a: &Matrix<f64>, b: &Matrix<f64>) -> Result<f64> {
    Ok(a.hadamard(b)?.data().iter().sum())
}

fn check_dense(seed: u64, idx: u64) -> Result<Check> {
    let mut rng = SeededRng::derive(seed, Purpose::GradCheck, 0, idx);
    let p = DenseParams::<f64>::init(5, 4, &mut rng);
    let x = Matrix::random_uniform(3, 5, -1.0, 1.0, &mut rng);
    let proj = Matrix::random_uniform(3, 4, -1.0, 1.0, &mut rng);

    let (_, cache) = p.forward(&x)?;
    let (dx, g) = p.backward(&cache, &proj)?;
    let x0 = pack(&[&p.w, &p.b, &x]);
    let analytic = pack(&[&g.w, &g.b, &dx]);
    let loss: LossFn = Box::new(move |flat| {
        let mut p2 = p.clone();
        let mut x2 = x.clone();
        unpack_into(flat, &mut [&mut p2.w, &mut p2.b, &mut x2]);
        let (y, _) = p2.forward(&x2)?;
        dot(&y, &proj)
    });
    Ok(Check { x0, analytic, loss })
}

fn check_batchnorm(seed: u64, idx: u64) -> Result<Check> {
    let mut rng = SeededRng::derive(seed, Purpose::GradCheck, 0, idx);
    let mut p = BatchNormParams::<f64>::init(4);
    p.gamma = Matrix::random_uniform(1, 4, 0.5, 1.5, &mut rng);
    p.beta = Matrix::random_uniform(1, 4, -0.5, 0.5, &mut rng);
    let x = Matrix::random_uniform(5, 4, -2.0, 2.0, &mut rng);
    let proj = Matrix::random_uniform(5, 4, -1.0, 1.0, &mut rng);

    let (_, cache) = p.forward(&x, Mode::Train)?;
    let (dx, g) = p.backward(&cache, &proj)?;
    let x0 = pack(&[&p.gamma, &p.beta, &x]);
    let analytic = pack(&[&g.gamma, &g.beta, &dx]);
    let loss: LossFn = Box::new(move |flat| {
        let mut p2 = p.clone();
        let mut x2 = x.clone();
        unpack_into(flat, &mut [&mut p2.gamma, &mut p2.beta, &mut x2]);
        let (y, _) = p2.forward(&x2, Mode::Train)?;
        dot(&y, &proj)
    });
    Ok(Check { x0, analytic, loss })
}

fn check_dropout(seed: u64, idx: u64) -> Result<Check> {
    let mut rng = SeededRng::derive(seed, Purpose::GradCheck, 0, idx);
    let x = Matrix::random_uniform(4, 5, -1.0, 1.0, &mut rng);
    let proj = Matrix::random_uniform(4, 5, -1.0, 1.0, &mut rng);
    let rate = 0.35;

    // The mask is a pure function of the derived stream, so re-deriving it
    // per evaluation keeps the loss deterministic in x.
    let mask_rng = move || SeededRng::derive(seed, Purpose::Dropout, u64::MAX, idx);
    let (_, cache) = dropout_forward(&x, rate, Mode::Train, Some(&mut mask_rng()))?;
    let dx = dropout_backward(&cache, &proj)?;
    let x0 = pack(&[&x]);
    let analytic = pack(&[&dx]);
    let loss: LossFn = Box::new(move |flat| {
        let mut x2 = x.clone();
        unpack_into(flat, &mut [&mut x2]);
        let (y, _) = dropout_forward(&x2, rate, Mode::Train, Some(&mut mask_rng()))?;
        dot(&y, &proj)
    });
    Ok(Check { x0, analytic, loss })
}

fn check_gru_cell(seed: u64, idx: u64) -> Result<Check> {
    let mut rng = SeededRng::derive(seed, Purpose::GradCheck, 0, idx);
    let p = GruParams::<f64>::init(4, 3, &mut rng);
    let x = Matrix::random_uniform(2, 4, -1.0, 1.0, &mut rng);
    let h_prev = Matrix::random_uniform(2, 3, -1.0, 1.0, &mut rng);
    let proj = Matrix::random_uniform(2, 3, -1.0, 1.0, &mut rng);

    let (_, cache) = p.step(&x, &h_prev)?;
    let mut g = p.grads_zero();
    let (dx, dh_prev) = p.step_backward(&cache, &proj, &mut g)?;
    let mut x0 = pack(&p.tensors());
    x0.extend(pack(&[&x, &h_prev]));
    let mut analytic = pack(&g.tensors());
    analytic.extend(pack(&[&dx, &dh_prev]));
    let loss: LossFn = Box::new(move |flat| {
        let mut p2 = p.clone();
        let mut x2 = x.clone();
        let mut h2 = h_prev.clone();
        let mut slots = p2.tensors_mut().into_iter().collect::<Vec<_>>();
        slots.push(&mut x2);
        slots.push(&mut h2);
        unpack_into(flat, &mut slots);
        let (h, _) = p2.step(&x2, &h2)?;
        dot(&h, &proj)
    });
    Ok(Check { x0, analytic, loss })
}

fn check_gru_layer(seed: u64, idx: u64) -> Result<Check> {
    let mut rng = SeededRng::derive(seed, Purpose::GradCheck, 0, idx);
    let p = GruParams::<f64>::init(3, 4, &mut rng);
    let steps = 5;
    let lengths = vec![3usize, 5];
    let input = Tensor3::from_steps(
        (0..steps).map(|_| Matrix::random_uniform(2, 3, -1.0, 1.0, &mut rng)).collect(),
    )?;
    // Project both outputs so the whole state sequence matters, not just
    // the final state.
    let proj_all = Tensor3::from_steps(
        (0..steps).map(|_| Matrix::random_uniform(2, 4, -1.0, 1.0, &mut rng)).collect(),
    )?;
    let proj_last = Matrix::random_uniform(2, 4, -1.0, 1.0, &mut rng);

    let (_, _, cache) = gru_layer_forward(&p, &input, &lengths)?;
    let (dx, g) = gru_layer_backward(&p, &cache, &proj_all, &proj_last)?;
    let mut x0 = pack(&p.tensors());
    let mut analytic = pack(&g.tensors());
    for t in 0..steps {
        x0.extend(input.step(t).data().iter().copied());
        analytic.extend(dx.step(t).data().iter().copied());
    }
    let loss: LossFn = Box::new(move |flat| {
        let mut p2 = p.clone();
        let mut in2 = input.clone();
        let mut slots = p2.tensors_mut().into_iter().collect::<Vec<_>>();
        slots.extend(in2.steps_mut());
        unpack_into(flat, &mut slots);
        let (h_all, h_last, _) = gru_layer_forward(&p2, &in2, &lengths)?;
        let mut total = dot(&h_last, &proj_last)?;
        for t in 0..steps {
            total += dot(h_all.step(t), proj_all.step(t))?;
        }
        Ok(total)
    });
    Ok(Check { x0, analytic, loss })
}

fn check_attention(seed: u64, idx: u64) -> Result<Check> {
    let mut rng = SeededRng::derive(seed, Purpose::GradCheck, 0, idx);
    let h_dim = 4;
    let steps = 4;
    let lengths = vec![2usize, 4];
    let p = AttentionParams::<f64>::init(h_dim, &mut rng);
    let h_all = Tensor3::from_steps(
        (0..steps).map(|_| Matrix::random_uniform(2, h_dim, -1.0, 1.0, &mut rng)).collect(),
    )?;
    let h_last = Matrix::random_uniform(2, h_dim, -1.0, 1.0, &mut rng);
    let proj = Matrix::random_uniform(2, 2 * h_dim, -1.0, 1.0, &mut rng);

    let (_, cache) = attention_forward(&p, &h_all, &h_last, &lengths)?;
    let (d_h_all, d_h_last, g) = attention_backward(&p, &cache, &h_all, &proj)?;
    let mut x0 = pack(&[&p.w_c]);
    x0.extend(pack(&p.gru.tensors()));
    x0.extend(pack(&[&h_last]));
    let mut analytic = pack(&[&g.w_c]);
    analytic.extend(pack(&g.gru.tensors()));
    analytic.extend(pack(&[&d_h_last]));
    for t in 0..steps {
        x0.extend(h_all.step(t).data().iter().copied());
        analytic.extend(d_h_all.step(t).data().iter().copied());
    }
    let loss: LossFn = Box::new(move |flat| {
        let mut p2 = p.clone();
        let mut last2 = h_last.clone();
        let mut all2 = h_all.clone();
        let mut slots: Vec<&mut Matrix<f64>> = vec![&mut p2.w_c];
        slots.extend(p2.gru.tensors_mut());
        slots.push(&mut last2);
        slots.extend(all2.steps_mut());
        unpack_into(flat, &mut slots);
        let (out, _) = attention_forward(&p2, &all2, &last2, &lengths)?;
        dot(&out, &proj)
    });
    Ok(Check { x0, analytic, loss })
}

fn check_cross_entropy(seed: u64, idx: u64) -> Result<Check> {
    let mut rng = SeededRng::derive(seed, Purpose::GradCheck, 0, idx);
    let logits = Matrix::random_uniform(3, 4, -2.0, 2.0, &mut rng);
    let labels = vec![0usize, 2, 1];

    let (_, d_logits) = cross_entropy(&logits, &labels)?;
    let x0 = pack(&[&logits]);
    let analytic = pack(&[&d_logits]);
    let loss: LossFn = Box::new(move |flat| {
        let mut l2 = logits.clone();
        unpack_into(flat, &mut [&mut l2]);
        let (loss, _) = cross_entropy(&l2, &labels)?;
        Ok(loss)
    });
    Ok(Check { x0, analytic, loss })
}

/// End to end: a small but structurally complete model (stacked encoder,
/// attention, both classifier stages, active dropout) on a ragged batch,
/// differentiating the training loss with respect to every parameter.
fn check_model(seed: u64, idx: u64) -> Result<Check> {
    let mut config = ModelConfig::new(4, 3);
    config.encoder_widths = vec![8, 8, 6];
    config.dropout_rate = 0.25;
    let mut rng = SeededRng::derive(seed, Purpose::GradCheck, 0, idx);
    let model = build_model::<f64>(config, &mut rng)?;

    let steps = 5;
    let lengths = vec![3usize, 5];
    let mut data = Tensor3::zeros(2, 4, steps);
    for t in 0..steps {
        for b in 0..2 {
            if t < lengths[b] {
                for r in 0..4 {
                    data.step_mut(t).set(b, r, rng.uniform(-1.0, 1.0));
                }
            }
        }
    }
    let batch = Batch { data, lengths, labels: vec![0, 2] };

    // Dropout masks replay from a re-derived stream each evaluation.
    let drop_rng = move || SeededRng::derive(seed, Purpose::Dropout, u64::MAX, idx);
    let (_, grads, _, _) = model.loss_and_grads(&batch, &mut drop_rng())?;
    let x0 = pack(&model.trainable_tensors());
    let analytic = pack(&grads.flatten());
    let loss: LossFn = Box::new(move |flat| {
        let mut m2 = model.clone();
        let mut slots = m2.trainable_tensors_mut();
        unpack_into(flat, &mut slots);
        let mut r = drop_rng();
        let (logits, _) = m2.forward_train(&batch, &mut r)?;
        let (loss, _) = cross_entropy(&logits, &batch.labels)?;
        Ok(loss)
    });
    Ok(Check { x0, analytic, loss })
}

fn build_check(name: &str, seed: u64, idx: u64) -> Result<Check> {
    match name {
        "dense" => check_dense(seed, idx),
        "batchnorm" => check_batchnorm(seed, idx),
        "dropout" => check_dropout(seed, idx),
        "gru_cell" => check_gru_cell(seed, idx),
        "gru_layer" => check_gru_layer(seed, idx),
        "attention" => check_attention(seed, idx),
        "cross_entropy" => check_cross_entropy(seed, idx),
        "model" => check_model(seed, idx),
        other => Err(Error::config(format!("unknown gradient check component {other:?}"))),
    }
}

fn central_diff_coord(f: &mut LossFn, x: &[f64], i: usize, h: f64) -> Result<f64> {
    let mut probe = x.to_vec();
    probe[i] = x[i] + h;
    let fp = f(&probe)?;
    probe[i] = x[i] - h;
    let fm = f(&probe)?;
    Ok((fp - fm) / (2.0 * h))
}

/// Worst relative error between the analytic gradient and central
/// differences, with step refinement on failing coordinates.
///
/// Central differences carry O(h) error across a ReLU kink even when the
/// analytic gradient is exact. Shrinking the step drives such artifacts to
/// zero while a real disagreement persists at every step size, so failing
/// coordinates get re-probed before judgment.
fn refined_max_rel_err(x0: &[f64], analytic: &[f64], loss: &mut LossFn) -> Result<f64> {
    let numeric = finite_diff_grad(&mut *loss, x0, FD_STEP)?;
    let mut max_rel_err = 0.0f64;
    for i in 0..x0.len() {
        let mut err = relative_error(analytic[i], numeric[i]);
        if err >= TOLERANCE {
            for shrink in [10.0, 100.0] {
                let refined = central_diff_coord(loss, x0, i, FD_STEP / shrink)?;
                err = err.min(relative_error(analytic[i], refined));
            }
        }
        max_rel_err = max_rel_err.max(err);
    }
    Ok(max_rel_err)
}

/// Run every component check. `fault` names a component whose analytic
/// gradient gets corrupted on purpose; the run must then fail.
pub fn run_gradcheck(seed: u64, fault: Option<&str>) -> Result<GradCheckReport> {
    if let Some(f) = fault {
        if !COMPONENTS.contains(&f) {
            return Err(Error::config(format!(
                "unknown fault target {f:?}; components: {}",
                COMPONENTS.join(", ")
            )));
        }
    }
    let mut components = Vec::with_capacity(COMPONENTS.len());
    for (idx, name) in COMPONENTS.iter().enumerate() {
        let Check { x0, mut analytic, mut loss } = build_check(name, seed, idx as u64)?;
        if fault == Some(name) {
            analytic[0] += 0.05 * (analytic[0].abs() + 1.0);
        }
        let max_rel_err = refined_max_rel_err(&x0, &analytic, &mut loss)?;
        components.push(ComponentReport {
            component: name.to_string(),
            checked: x0.len(),
            max_rel_err,
            tolerance: TOLERANCE,
            passed: max_rel_err < TOLERANCE,
        });
    }
    let passed = components.iter().all(|c| c.passed);
    Ok(GradCheckReport { seed, components, passed })
}
