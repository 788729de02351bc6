//! `bcnn`: synthetic corpus generation, augmentation, training, evaluation,
//! single-image prediction and the gradient-check gate.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error, 3 gradcheck failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bcnn::checkpoint::load_checkpoint;
use bcnn::data::{
    augment_dataset, image_tensor, load_dataset, pnm, synth_corpus, write_corpus, AugmentSpec,
    DistressClass,
};
use bcnn::model::{forward, gradient_gate, ModelConfig};
use bcnn::tensor::softmax_rows;
use bcnn::train::{evaluate, train_with, OptimizerKind, TrainConfig};

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_GRADCHECK: u8 = 3;

/// Validation share used by `--split-ratio-alt` (an 80/20 split).
const ALT_VAL_RATIO: f64 = 0.2;

#[derive(Debug, Parser)]
#[command(name = "bcnn", version, about = "Pavement distress classification with a bidirectional cascaded CNN")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a labelled synthetic corpus.
    Synth(SynthArgs),
    /// Write originals plus augmented variants of a corpus.
    Augment(AugmentArgs),
    /// Train a model and write its checkpoint and epoch log.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a corpus and write report.csv.
    Eval(EvalArgs),
    /// Classify a single image.
    Predict(PredictArgs),
    /// Finite-difference check of every primitive and the tiny model.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    per_class: usize,
    #[arg(long, default_value_t = 64)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct AugmentFlags {
    /// Counter-clockwise rotation angles in degrees.
    #[arg(long, value_delimiter = ',', default_values_t = [90.0, 180.0, 270.0], allow_negative_numbers = true)]
    rotations: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.8, 1.2])]
    scales: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.8, 1.2])]
    brightness: Vec<f64>,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 3)]
    variants: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    transforms: AugmentFlags,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 15)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0.25)]
    val_ratio: f64,
    /// Use an 80/20 split instead of the default 75/25.
    #[arg(long, conflicts_with = "val_ratio")]
    split_ratio_alt: bool,
    /// Seeds weight initialisation, the split, shuffling and augmentation.
    #[arg(long, default_value_t = 0)]
    seed: u32,
    #[arg(long, default_value = "bcnn.ckpt")]
    checkpoint: PathBuf,
    #[arg(long, default_value = "train_log.csv")]
    log: PathBuf,
    #[arg(long, default_value = "adam", value_parser = ["adam", "sgd"])]
    optimizer: String,
    #[arg(long, default_value_t = 64)]
    input_size: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [16, 32, 64])]
    channels: Vec<usize>,
    /// Augmented variants per training image (0 disables augmentation).
    #[arg(long, default_value_t = 0)]
    augment: usize,
    /// Augment before splitting, so variants can land in validation.
    #[arg(long, requires = "augment")]
    augment_before_split: bool,
    #[command(flatten)]
    transforms: AugmentFlags,
    #[arg(long)]
    clip_norm: Option<f64>,
    /// Early-stopping patience in epochs.
    #[arg(long)]
    early_stopping: Option<usize>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value = "report.csv")]
    report: PathBuf,
    #[arg(long, default_value_t = 32)]
    batch: usize,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Class names in label order.
    #[arg(long, value_delimiter = ',', default_values_t = DistressClass::ALL.map(|c| c.dir_name().to_string()))]
    classes: Vec<String>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

enum Failure {
    Runtime(bcnn::Error),
    Gradcheck,
}

impl From<bcnn::Error> for Failure {
    fn from(e: bcnn::Error) -> Self {
        Failure::Runtime(e)
    }
}

type CmdResult = Result<(), Failure>;

fn spec_from(flags: &AugmentFlags, variants: usize, seed: u64) -> AugmentSpec {
    AugmentSpec {
        rotations: flags.rotations.clone(),
        scales: flags.scales.clone(),
        brightness: flags.brightness.clone(),
        variants,
        seed,
    }
}

fn synth(args: &SynthArgs) -> CmdResult {
    let corpus = synth_corpus(args.per_class, args.size, args.seed)?;
    let written = write_corpus(&corpus, &args.out)?;
    println!("wrote {} images to {}", written.len(), args.out.display());
    Ok(())
}

fn augment(args: &AugmentArgs) -> CmdResult {
    let corpus = load_dataset(&args.input)?;
    let spec = spec_from(&args.transforms, args.variants, args.seed);
    let out = write_corpus(&augment_dataset(&corpus, &spec)?, &args.out)?;
    println!(
        "wrote {} images ({} originals, {} variants each) to {}",
        out.len(),
        corpus.len(),
        args.variants,
        args.out.display()
    );
    Ok(())
}

fn train(args: &TrainArgs) -> CmdResult {
    let model = ModelConfig {
        input_size: args.input_size,
        channels: args.channels.clone(),
        seed: args.seed,
        ..ModelConfig::default()
    };
    model.validate()?;
    let cfg = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch,
        lr: args.lr,
        val_ratio: if args.split_ratio_alt { ALT_VAL_RATIO } else { args.val_ratio },
        seed: u64::from(args.seed),
        optimizer: args.optimizer.parse::<OptimizerKind>()?,
        clip_norm: args.clip_norm,
        early_stopping: args.early_stopping,
        augment: (args.augment > 0)
            .then(|| spec_from(&args.transforms, args.augment, u64::from(args.seed))),
        augment_before_split: args.augment_before_split,
        log_path: Some(args.log.clone()),
        checkpoint_path: Some(args.checkpoint.clone()),
    };
    cfg.validate()?;
    println!("model: {model:?}");
    println!("training: {cfg:?}");

    let corpus = load_dataset(&args.data)?;
    println!("corpus: {} images, classes {:?}", corpus.len(), corpus.class_names());
    let out = train_with(&corpus, &model, &cfg, |r| {
        println!(
            "epoch {:>3}  train_loss {:.4}  train_acc {:.4}  val_loss {:.4}  val_acc {:.4}",
            r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc
        );
    })?;
    println!(
        "split: {} train / {} validation; wrote {} and {}",
        out.train_set.len(),
        out.val_set.len(),
        args.checkpoint.display(),
        args.log.display()
    );
    Ok(())
}

fn eval(args: &EvalArgs) -> CmdResult {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let corpus = load_dataset(&args.data)?;
    let (matrix, report) = evaluate(&ckpt.params, &corpus, args.batch)?;
    report.write_csv(&args.report)?;
    println!("confusion matrix (rows: true, columns: predicted)");
    for (name, row) in matrix.class_names().iter().zip(matrix.rows()) {
        println!("  {name:>10} {row:?}");
    }
    print!("{}", report.display_table());
    println!("wrote {}", args.report.display());
    Ok(())
}

fn predict(args: &PredictArgs) -> CmdResult {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let cfg = ckpt.config();
    if args.classes.len() != cfg.classes {
        return Err(bcnn::Error::Consistency(format!(
            "{} class names given for a {}-class model",
            args.classes.len(),
            cfg.classes
        ))
        .into());
    }
    let img = pnm::read(&args.image)?;
    let x = image_tensor::<f32>(&img, cfg.input_size)?;
    let (logits, _) = forward(&ckpt.params, &x)?;
    let probs = softmax_rows(&logits)?;
    let p = probs.data();
    let best = bcnn::model::argmax_rows(&logits)?[0];
    println!("{}", args.classes[best]);
    for (name, &v) in args.classes.iter().zip(p) {
        println!("  {name:>10} {v:.4}");
    }
    Ok(())
}

fn gradcheck(args: &GradcheckArgs) -> CmdResult {
    let gate = gradient_gate(args.seed)?;
    for c in &gate.primitives {
        println!("  {:<18} {:<8} {:.3e}", c.op, c.input, c.max_rel_error);
    }
    for t in &gate.tensors {
        println!("  {:<27} {:.3e}", t.name, t.max_rel_error);
    }
    let worst = gate.max_rel_error();
    if gate.passes(args.tol) {
        println!("gradcheck passed: max relative error {worst:.3e} < {:.0e}", args.tol);
        Ok(())
    } else {
        println!("gradcheck FAILED: max relative error {worst:.3e} >= {:.0e}", args.tol);
        Err(Failure::Gradcheck)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    println!("config: {:?}", cli.command);
    let result = match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Augment(a) => augment(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Predict(a) => predict(a),
        Command::Gradcheck(a) => gradcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(Failure::Gradcheck) => ExitCode::from(EXIT_GRADCHECK),
    }
}
