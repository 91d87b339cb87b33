//! Save a trained model to the binary checkpoint format and load it back.
//! The roundtrip must preserve configuration, vocabulary, normalization
//! statistics, and every weight, so predictions agree bit for bit.
//!
//!     cargo run --release --example checkpoint_roundtrip

use grurec::data::synth::synth_generate;
use grurec::model::checkpoint::{load_checkpoint, save_checkpoint};
use grurec::model::{build_model, ModelConfig};
use grurec::optim::train::{train, TrainConfig};
use grurec::rng::{Purpose, SeededRng};

fn main() -> grurec::Result<()> {
    let (train_set, test) = synth_generate::<f32>(3, 8, 3, 4, 21)?;
    let mut config = ModelConfig::new(4, 3);
    config.encoder_widths = vec![16, 12];
    config.fc_width = 16;
    let mut rng = SeededRng::derive(21, Purpose::Init, 0, 0);
    let mut model = build_model::<f32>(config, &mut rng)?;

    let mut cfg = TrainConfig::default();
    cfg.seed = 21;
    cfg.batch_size = 8;
    cfg.max_epochs = 10;
    train(&mut model, &train_set, Some(&test), &cfg)?;

    let dir = std::env::temp_dir().join("grurec_roundtrip");
    std::fs::create_dir_all(&dir).ok();
    let path = dir.join("model.dgru");
    save_checkpoint(&model, &path)?;
    let bytes = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
    println!("wrote {} ({} bytes)", path.display(), bytes);

    let restored = load_checkpoint(&path)?;
    assert_eq!(restored.config, model.config);
    assert_eq!(restored.labels, model.labels);

    let a = model.predict_many(test.samples())?;
    let b = restored.predict_many(test.samples())?;
    let mut identical = true;
    for (x, y) in a.iter().zip(&b) {
        identical &= x.class_index == y.class_index && x.probs == y.probs;
    }
    println!(
        "{} predictions after reload: {}",
        a.len(),
        if identical { "bit-identical" } else { "MISMATCH" }
    );
    assert!(identical);
    Ok(())
}
