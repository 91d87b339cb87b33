//! Zero padding must be invisible: a batch padded to the longest sample and
//! the same batch padded with extra all-zero steps produce identical logits,
//! because the encoder reads each sequence only up to its true length and
//! attention masks the padded tail.
//!
//!     cargo run --release --example padding_invariance

use grurec::data::synth::synth_generate;
use grurec::data::pad_batch_to;
use grurec::model::{build_model, ModelConfig};
use grurec::rng::{Purpose, SeededRng};

fn main() -> grurec::Result<()> {
    let (train, _) = synth_generate::<f32>(4, 6, 1, 5, 9)?;
    let mut config = ModelConfig::new(train.feature_dim(), train.labels().len());
    config.encoder_widths = vec![24, 16];
    let mut rng = SeededRng::derive(9, Purpose::Init, 0, 0);
    let model = build_model::<f32>(config, &mut rng)?;

    let refs: Vec<_> = train.samples().iter().take(8).collect();
    let labels = vec![0usize; refs.len()];
    let longest = refs.iter().map(|s| s.len()).max().unwrap();

    let base = model.forward_eval(&pad_batch_to(&refs, labels.clone(), 0)?)?;
    for extra in [1usize, 7, 31] {
        let padded = model.forward_eval(&pad_batch_to(&refs, labels.clone(), longest + extra)?)?;
        let mut worst = 0f32;
        for (a, b) in base.data().iter().zip(padded.data()) {
            worst = worst.max((a - b).abs());
        }
        println!("padded {longest} -> {} steps: max |logit delta| = {worst:e}", longest + extra);
    }
    Ok(())
}
