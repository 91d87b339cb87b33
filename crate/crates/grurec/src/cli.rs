//! Command line surface. Every command prints machine-readable JSON on
//! stdout and human progress on stderr, and maps errors onto the stable
//! exit code contract (0 ok, 1 failed check, 2 config, 3 data, 4 divergence).
//!
//! The environment variable `GRUREC_SEED` overrides any `--seed` flag.

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data::augment::{AugmentSpec, GpsrSpec};
use crate::data::synth::{synth_generate, synth_generate_subjects};
use crate::data::{load_dataset, load_samples, save_samples, Dataset};
use crate::error::{Error, Result};
use crate::gradcheck::run_gradcheck;
use crate::manifest::RunManifest;
use crate::model::checkpoint::{load_checkpoint, save_checkpoint};
use crate::model::{build_model, Model, ModelConfig, DEFAULT_ENCODER_WIDTHS};
use crate::optim::metrics::evaluate;
use crate::optim::train::{train_with, EpochRecord, TrainConfig};
use crate::optim::AdamConfig;
use crate::protocol::run_protocol_t;
use crate::rng::{Purpose, SeededRng};
use crate::scalar::Scalar;

#[derive(Parser)]
#[command(
    name = "grurec",
    version,
    about = "Recurrent gesture and action sequence recognizer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a JSONL dataset and write a checkpoint.
    Train(TrainArgs),
    /// Score a trained model against a labeled dataset.
    Eval(EvalArgs),
    /// Classify samples; labels in the input are optional and ignored.
    Predict(PredictArgs),
    /// Generate a synthetic, separable-by-construction dataset.
    Synth(SynthArgs),
    /// Per-participant protocol: train on T samples per class per subject.
    ProtocolT(ProtocolTArgs),
    /// Verify every analytic gradient against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        self == Switch::On
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Precision {
    F32,
    F64,
}

impl Precision {
    fn name(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }
}

#[derive(Args)]
struct ModelFlags {
    /// Comma-separated hidden widths for the stacked recurrent encoder,
    /// overriding --stacks.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,

    /// Encoder depth preset: 5 (512,512,256,256,128) or 3 (512,256,128).
    #[arg(long)]
    stacks: Option<usize>,

    /// Number of classifier stages, 1 or 2.
    #[arg(long, default_value_t = 2)]
    fc: usize,

    /// Width of the first classifier stage (with --fc 2).
    #[arg(long, default_value_t = 256)]
    fc_width: usize,

    /// Dropout rate in [0, 1).
    #[arg(long, default_value_t = 0.5)]
    dropout: f64,

    /// Context pooling over all time steps; off reduces to the last state.
    #[arg(long, value_enum, default_value_t = Switch::On)]
    attention: Switch,
}

impl ModelFlags {
    fn resolve(&self, input_dim: usize, num_classes: usize) -> Result<ModelConfig> {
        let mut config = ModelConfig::new(input_dim, num_classes);
        if self.hidden.is_some() && self.stacks.is_some() {
            return Err(Error::config("--hidden and --stacks are mutually exclusive"));
        }
        if let Some(widths) = &self.hidden {
            config.encoder_widths = widths.clone();
        } else if let Some(stacks) = self.stacks {
            config.encoder_widths = match stacks {
                5 => DEFAULT_ENCODER_WIDTHS.to_vec(),
                3 => vec![512, 256, 128],
                other => {
                    return Err(Error::config(format!("--stacks must be 3 or 5, got {other}")))
                }
            };
        }
        config.fc_count = self.fc;
        config.fc_width = self.fc_width;
        config.dropout_rate = self.dropout;
        config.use_attention = self.attention.on();
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct TrainFlags {
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    #[arg(long, default_value_t = 0.0)]
    weight_decay: f64,
    #[arg(long, default_value_t = 128)]
    batch_size: usize,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    /// Stop after this many epochs without validation improvement.
    #[arg(long, default_value_t = 50)]
    patience: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// More than one thread parallelizes augmentation across samples;
    /// byte-determinism is only guaranteed single-threaded.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, value_enum, default_value_t = Precision::F32)]
    precision: Precision,

    /// Training-time augmentation as a whole.
    #[arg(long, value_enum, default_value_t = Switch::On)]
    augment: Switch,
    /// Random per-axis scaling in [1-f, 1+f].
    #[arg(long, default_value_t = 0.3)]
    scale_factor: f64,
    /// Random constant offset per feature in [-f, +f] (normalized units).
    #[arg(long, default_value_t = 1.0)]
    translate_factor: f64,
    /// Random rotation about the up axis, within +/- this many radians.
    /// Requires --point-layout and a feature dimension divisible by 3.
    #[arg(long)]
    rotate_factor: Option<f64>,
    /// Resampling augmentation (synthetic variable sampling rates).
    #[arg(long, value_enum, default_value_t = Switch::On)]
    gpsr: Switch,
    /// Treat features as concatenated 3-D points.
    #[arg(long, default_value_t = false)]
    point_layout: bool,
}

impl TrainFlags {
    fn resolve(&self) -> Result<TrainConfig> {
        let augment = if self.augment.on() {
            Some(AugmentSpec {
                scale_factor: self.scale_factor,
                translate_factor: self.translate_factor,
                rotate_factor: self.rotate_factor,
                gpsr: if self.gpsr.on() { Some(GpsrSpec::default()) } else { None },
                point_layout: self.point_layout,
            })
        } else {
            None
        };
        let cfg = TrainConfig {
            adam: AdamConfig {
                lr: self.lr,
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.eps,
                weight_decay: self.weight_decay,
            },
            batch_size: self.batch_size,
            max_epochs: self.epochs,
            patience: self.patience,
            seed: effective_seed(self.seed)?,
            augment,
            threads: self.threads,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Training dataset (JSON lines).
    #[arg(long)]
    data: PathBuf,
    /// Optional validation dataset; defaults to a stratified 10% holdout.
    #[arg(long)]
    val: Option<PathBuf>,
    /// Checkpoint path; history and manifest are written next to it.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    model: ModelFlags,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Samples to classify (JSON lines, labels optional).
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 8)]
    classes: usize,
    #[arg(long, default_value_t = 20)]
    train_per_class: usize,
    #[arg(long, default_value_t = 20)]
    test_per_class: usize,
    #[arg(long, default_value_t = 6)]
    dim: usize,
    /// Output directory; receives train.jsonl and test.jsonl, or
    /// subjects.jsonl with --subjects.
    #[arg(long)]
    out_dir: PathBuf,
    /// Emit one subject-tagged file for the per-participant protocol
    /// instead of a train/test pair.
    #[arg(long)]
    subjects: Option<usize>,
    /// Samples per subject per class (with --subjects).
    #[arg(long, default_value_t = 6)]
    per_subject_class: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct ProtocolTArgs {
    /// Dataset with subject ids on every sample.
    #[arg(long)]
    data: PathBuf,
    /// Training samples per class per participant.
    #[arg(long = "T", visible_alias = "t")]
    t: usize,
    #[command(flatten)]
    model: ModelFlags,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Corrupt one component's analytic gradient on purpose (self-test of
    /// the harness).
    #[arg(long, hide = true)]
    inject_fault: Option<String>,
}

/// GRUREC_SEED wins over any --seed flag when set.
fn effective_seed(flag: u64) -> Result<u64> {
    match std::env::var("GRUREC_SEED") {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::config(format!("GRUREC_SEED must be an unsigned integer, got {v:?}"))),
        Err(_) => Ok(flag),
    }
}

fn configure_threads(threads: usize) {
    if threads > 1 {
        // Ignore the error: the global pool can only be set once per process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
}

fn print_json<S: serde::Serialize>(value: &S) -> Result<()> {
    let line = serde_json::to_string(value)
        .map_err(|e| Error::data(format!("output serialization: {e}")))?;
    println!("{line}");
    Ok(())
}

fn cli_args() -> Vec<String> {
    std::env::args().skip(1).collect()
}

/// Parse argv and run. Returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Synth(args) => cmd_synth(args),
        Command::ProtocolT(args) => cmd_protocol_t(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
    }
}

#[derive(serde::Serialize)]
struct TrainSummary<'a> {
    checkpoint: &'a str,
    history: &'a str,
    manifest: &'a str,
    epochs_run: usize,
    best_epoch: usize,
    best_val_acc: f64,
    param_count: usize,
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let cfg = args.train.resolve()?;
    configure_threads(cfg.threads);
    match args.train.precision {
        Precision::F32 => train_generic::<f32>(&args, cfg),
        Precision::F64 => train_generic::<f64>(&args, cfg),
    }
}

fn train_generic<T: Scalar>(args: &TrainArgs, cfg: TrainConfig) -> Result<()> {
    let data: Dataset<T> = load_dataset(&args.data)?;
    let val: Option<Dataset<T>> = match &args.val {
        Some(p) => Some(load_dataset(p)?),
        None => None,
    };
    let config = args.model.resolve(data.feature_dim(), data.labels().len())?;

    let mut rng = SeededRng::derive(cfg.seed, Purpose::Init, 0, 0);
    let mut model = build_model::<T>(config.clone(), &mut rng)?;
    eprintln!(
        "training {} parameters on {} samples ({} classes, dim {})",
        model.param_count(),
        data.len(),
        data.labels().len(),
        data.feature_dim()
    );

    let outcome = train_with(&mut model, &data, val.as_ref(), &cfg, |r: &EpochRecord| {
        eprintln!(
            "epoch {:>4}  loss {:.4}  acc {:.3}  val {:.3}  ({:.1}s)",
            r.epoch, r.train_loss, r.train_acc, r.val_acc, r.elapsed_s
        );
    })?;

    save_checkpoint(&model, &args.out)?;
    let history_path = format!("{}.history.jsonl", args.out.display());
    write_history(&outcome.history, &history_path)?;

    let manifest_path = format!("{}.manifest.json", args.out.display());
    let mut manifest =
        RunManifest::new("train", cfg.seed, args.train.precision.name(), cfg.threads);
    manifest.args = cli_args();
    manifest.model = Some(config);
    manifest.train = Some(cfg);
    manifest.add_input(&args.data)?;
    if let Some(v) = &args.val {
        manifest.add_input(v)?;
    }
    manifest.add_output(&args.out);
    manifest.add_output(&history_path);
    manifest.save(&manifest_path)?;

    print_json(&TrainSummary {
        checkpoint: &args.out.display().to_string(),
        history: &history_path,
        manifest: &manifest_path,
        epochs_run: outcome.history.len(),
        best_epoch: outcome.best_epoch,
        best_val_acc: outcome.best_val_acc,
        param_count: model.param_count(),
    })
}

fn write_history(history: &[EpochRecord], path: &str) -> Result<()> {
    let mut out = Vec::new();
    for rec in history {
        serde_json::to_writer(&mut out, rec)
            .map_err(|e| Error::data(format!("history serialization: {e}")))?;
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let model = load_checkpoint(&args.model)?;
    let data: Dataset<f32> = load_dataset(&args.data)?;
    let metrics = evaluate(&model, &data)?;
    print_json(&metrics)
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let model: Model<f32> = load_checkpoint(&args.model)?;
    let samples = load_samples::<f32>(&args.input)?;
    let predictions = model.predict_many(&samples)?;
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    for (sample, pred) in samples.iter().zip(&predictions) {
        let line = serde_json::json!({
            "id": sample.id,
            "label": pred.label,
            "probs": pred.probs,
        });
        writeln!(lock, "{line}").map_err(|e| Error::io("stdout", e))?;
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let seed = effective_seed(args.seed)?;
    fs::create_dir_all(&args.out_dir)
        .map_err(|e| Error::io(args.out_dir.display().to_string(), e))?;

    let mut manifest = RunManifest::new("synth", seed, "f64", 1);
    manifest.args = cli_args();
    let mut outputs: Vec<PathBuf> = Vec::new();
    let summary: serde_json::Value;

    match args.subjects {
        Some(subjects) => {
            let data = synth_generate_subjects::<f64>(
                args.classes,
                subjects,
                args.per_subject_class,
                args.dim,
                seed,
            )?;
            let path = args.out_dir.join("subjects.jsonl");
            save_samples(data.samples(), &path)?;
            manifest.params = Some(serde_json::json!({
                "classes": args.classes,
                "subjects": subjects,
                "per_subject_class": args.per_subject_class,
                "dim": args.dim,
            }));
            summary = serde_json::json!({
                "subjects_file": path.display().to_string(),
                "samples": data.len(),
            });
            outputs.push(path);
        }
        None => {
            let (train_set, test_set) = synth_generate::<f64>(
                args.classes,
                args.train_per_class,
                args.test_per_class,
                args.dim,
                seed,
            )?;
            let train_path = args.out_dir.join("train.jsonl");
            let test_path = args.out_dir.join("test.jsonl");
            save_samples(train_set.samples(), &train_path)?;
            save_samples(test_set.samples(), &test_path)?;
            manifest.params = Some(serde_json::json!({
                "classes": args.classes,
                "train_per_class": args.train_per_class,
                "test_per_class": args.test_per_class,
                "dim": args.dim,
            }));
            summary = serde_json::json!({
                "train_file": train_path.display().to_string(),
                "test_file": test_path.display().to_string(),
                "train_samples": train_set.len(),
                "test_samples": test_set.len(),
            });
            outputs.push(train_path);
            outputs.push(test_path);
        }
    }

    for p in &outputs {
        manifest.add_output(p);
    }
    manifest.save(args.out_dir.join("manifest.json"))?;
    print_json(&summary)
}

fn cmd_protocol_t(args: ProtocolTArgs) -> Result<()> {
    let cfg = args.train.resolve()?;
    configure_threads(cfg.threads);
    match args.train.precision {
        Precision::F32 => protocol_generic::<f32>(&args, cfg),
        Precision::F64 => protocol_generic::<f64>(&args, cfg),
    }
}

fn protocol_generic<T: Scalar>(args: &ProtocolTArgs, cfg: TrainConfig) -> Result<()> {
    let data: Dataset<T> = load_dataset(&args.data)?;
    let template = args.model.resolve(data.feature_dim(), data.labels().len())?;
    eprintln!(
        "protocol T={} over {} samples, {} classes",
        args.t,
        data.len(),
        data.labels().len()
    );
    let report = run_protocol_t(&data, args.t, &template, &cfg)?;
    for p in &report.participants {
        eprintln!(
            "subject {:<12} train {:>3}  test {:>3}  acc {:.3}",
            p.subject, p.train_size, p.test_size, p.accuracy
        );
    }
    print_json(&report)
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<()> {
    let seed = effective_seed(args.seed)?;
    let report = run_gradcheck(seed, args.inject_fault.as_deref())?;
    for c in &report.components {
        eprintln!(
            "{:<14} max rel err {:.3e}  ({} values checked)",
            c.component, c.max_rel_err, c.checked
        );
    }
    print_json(&report)?;
    if report.passed {
        Ok(())
    } else {
        let failing: Vec<&str> = report
            .components
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.component.as_str())
            .collect();
        Err(Error::CheckFailed(format!(
            "gradient check failed for: {}",
            failing.join(", ")
        )))
    }
}
