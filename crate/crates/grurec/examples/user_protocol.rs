//! Per-user evaluation: for every subject, train a fresh model on T samples
//! per class from that subject alone and test on the rest of their data.
//! Larger T should help, so the example runs T=2 and T=4 side by side.
//!
//!     cargo run --release --example user_protocol

use grurec::data::synth::synth_generate_subjects;
use grurec::model::ModelConfig;
use grurec::optim::train::TrainConfig;
use grurec::protocol::run_protocol_t;

fn main() -> grurec::Result<()> {
    let data = synth_generate_subjects::<f32>(5, 4, 8, 6, 11)?;
    println!(
        "{} samples, {} classes, 4 subjects, 8 repetitions each",
        data.len(),
        data.labels().len()
    );

    let mut template = ModelConfig::new(data.feature_dim(), data.labels().len());
    template.encoder_widths = vec![32, 24];
    template.fc_width = 24;
    template.dropout_rate = 0.25;

    let mut cfg = TrainConfig::default();
    cfg.seed = 11;
    cfg.batch_size = 8;
    cfg.max_epochs = 40;
    cfg.patience = 40;

    for t in [2usize, 4] {
        let report = run_protocol_t(&data, t, &template, &cfg)?;
        println!("\nT={t}");
        for p in &report.participants {
            println!(
                "  {:<10} train {:2}  test {:2}  acc {:.3}",
                p.subject, p.train_size, p.test_size, p.accuracy
            );
        }
        println!("  mean accuracy {:.3}", report.mean_accuracy);
    }
    Ok(())
}
