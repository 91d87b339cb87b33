//! Train a small recurrent classifier on generated data, end to end:
//! generate, train with early stopping, evaluate, report per-class accuracy.
//!
//!     cargo run --release --example train_synthetic

use grurec::data::synth::synth_generate;
use grurec::model::{build_model, ModelConfig};
use grurec::optim::metrics::evaluate;
use grurec::optim::train::{train_with, TrainConfig};
use grurec::rng::{Purpose, SeededRng};

fn main() -> grurec::Result<()> {
    let seed = 42;
    let (train, test) = synth_generate::<f32>(8, 20, 20, 6, seed)?;
    println!("{} train / {} test samples, {} classes", train.len(), test.len(), train.labels().len());

    let mut config = ModelConfig::new(train.feature_dim(), train.labels().len());
    config.encoder_widths = vec![48, 32, 24];
    config.fc_width = 32;
    config.dropout_rate = 0.25;

    let mut rng = SeededRng::derive(seed, Purpose::Init, 0, 0);
    let mut model = build_model::<f32>(config, &mut rng)?;
    println!("model has {} parameters", model.param_count());

    let mut cfg = TrainConfig::default();
    cfg.seed = seed;
    cfg.batch_size = 16;
    cfg.max_epochs = 60;
    cfg.patience = 15;

    let outcome = train_with(&mut model, &train, None, &cfg, |r| {
        if r.epoch % 10 == 0 {
            println!(
                "epoch {:3}  loss {:.4}  train acc {:.3}  val acc {:.3}",
                r.epoch, r.train_loss, r.train_acc, r.val_acc
            );
        }
    })?;
    println!("best epoch {} with val acc {:.3}", outcome.best_epoch, outcome.best_val_acc);

    let metrics = evaluate(&model, &test)?;
    println!("test accuracy {:.3}, mean loss {:.4}", metrics.accuracy, metrics.mean_loss);
    for c in &metrics.per_class {
        println!("  {:<10} {:2}/{:2}  ({:.3})", c.label, c.correct, c.support, c.accuracy);
    }
    Ok(())
}
