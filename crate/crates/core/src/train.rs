//! Training loop, evaluation and the per-epoch log.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::checkpoint::{save_checkpoint, Checkpoint};
use crate::data::{augment_dataset, stratified_split, to_batches, AugmentSpec, DatasetManifest};
use crate::error::{Error, Result};
use crate::metrics::{ConfusionMatrix, MetricsReport};
use crate::model::{argmax_rows, backward, build_model, forward, ModelConfig, ParameterSet};
use crate::optim::{adam_init, adam_step, clip_grad_norm, sgd_step, AdamConfig};
use crate::seed::derive_seed;
use crate::tensor::softmax_xent;

/// Stream tags for [`derive_seed`], so split, shuffle and augmentation draws
/// never share a generator.
const SPLIT_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;
const AUGMENT_STREAM: u64 = 3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(Self::Adam),
            "sgd" => Ok(Self::Sgd),
            other => Err(Error::Config(format!(
                "unknown optimizer {other:?} (expected adam or sgd)"
            ))),
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Adam => "adam",
            Self::Sgd => "sgd",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Fraction of each class held out for validation.
    pub val_ratio: f64,
    /// Drives the split, the per-epoch shuffles and augmentation. Weight
    /// initialisation uses the model config's own seed.
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Global gradient-norm cap. Off by default.
    pub clip_norm: Option<f64>,
    /// Stop once validation loss has not improved for this many epochs.
    /// Off by default, so a run always yields `epochs` records.
    pub early_stopping: Option<usize>,
    pub augment: Option<AugmentSpec>,
    /// Augment the whole corpus before splitting instead of only the
    /// training side. Lets near-duplicates leak into validation.
    pub augment_before_split: bool,
    pub log_path: Option<PathBuf>,
    pub checkpoint_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 15,
            batch_size: 32,
            lr: 1e-3,
            val_ratio: 0.25,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            clip_norm: None,
            early_stopping: None,
            augment: None,
            augment_before_split: false,
            log_path: None,
            checkpoint_path: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.val_ratio > 0.0 && self.val_ratio < 1.0) {
            return Err(Error::Config(format!(
                "validation ratio must lie in (0, 1), got {}",
                self.val_ratio
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("clip norm must be positive, got {c}")));
            }
        }
        if self.early_stopping == Some(0) {
            return Err(Error::Config("early-stopping patience must be at least 1".into()));
        }
        if let Some(spec) = &self.augment {
            spec.validate()?;
        }
        Ok(())
    }
}

/// One row of the training curves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ParameterSet<f32>,
    pub records: Vec<EpochRecord>,
    pub train_set: DatasetManifest,
    pub val_set: DatasetManifest,
}

/// Loss and confusion matrix from one full, unshuffled pass.
#[derive(Clone, Debug)]
pub struct EvalPass {
    pub loss: f64,
    pub matrix: ConfusionMatrix,
}

impl EvalPass {
    pub fn accuracy(&self) -> f64 {
        self.matrix.accuracy::<f64>()
    }
}

fn check_classes(params: &ParameterSet<f32>, manifest: &DatasetManifest) -> Result<()> {
    let (model, data) = (params.config().classes, manifest.class_count());
    if model != data {
        return Err(Error::Consistency(format!(
            "model has {model} classes but the corpus has {data}"
        )));
    }
    Ok(())
}

/// Mean cross-entropy and confusion matrix of `params` over `manifest`.
pub fn evaluate_pass(
    params: &ParameterSet<f32>,
    manifest: &DatasetManifest,
    batch_size: usize,
) -> Result<EvalPass> {
    if manifest.is_empty() {
        return Err(Error::Corpus("cannot evaluate an empty corpus".into()));
    }
    check_classes(params, manifest)?;
    let size = params.config().input_size;
    let mut matrix = ConfusionMatrix::new(manifest.class_names().to_vec());
    let mut loss_sum = 0.0f64;
    for batch in to_batches::<f32>(manifest, batch_size, size, None)? {
        let (logits, _) = forward(params, &batch.images)?;
        let (loss, _) = softmax_xent(&logits, &batch.labels)?;
        loss_sum += f64::from(loss) * batch.labels.len() as f64;
        matrix.accumulate(&batch.labels, &argmax_rows(&logits)?)?;
    }
    Ok(EvalPass {
        loss: loss_sum / manifest.len() as f64,
        matrix,
    })
}

pub fn evaluate(
    params: &ParameterSet<f32>,
    manifest: &DatasetManifest,
    batch_size: usize,
) -> Result<(ConfusionMatrix, MetricsReport<f64>)> {
    let pass = evaluate_pass(params, manifest, batch_size)?;
    let report = pass.matrix.report()?;
    Ok((pass.matrix, report))
}

/// Splits (and optionally augments) the corpus the way [`train`] does.
pub fn prepare_splits(
    manifest: &DatasetManifest,
    cfg: &TrainConfig,
) -> Result<(DatasetManifest, DatasetManifest)> {
    let split_seed = derive_seed(cfg.seed, &[SPLIT_STREAM]);
    let augment = |m: &DatasetManifest, spec: &AugmentSpec| {
        let spec = AugmentSpec {
            seed: derive_seed(spec.seed, &[cfg.seed, AUGMENT_STREAM]),
            ..spec.clone()
        };
        augment_dataset(m, &spec)
    };
    let (train, val) = match &cfg.augment {
        Some(spec) if cfg.augment_before_split => {
            stratified_split(&augment(manifest, spec)?, 1.0 - cfg.val_ratio, split_seed)?
        }
        Some(spec) => {
            let (train, val) = stratified_split(manifest, 1.0 - cfg.val_ratio, split_seed)?;
            (augment(&train, spec)?, val)
        }
        None => stratified_split(manifest, 1.0 - cfg.val_ratio, split_seed)?,
    };
    if train.is_empty() || val.is_empty() {
        return Err(Error::Corpus("split left one side empty".into()));
    }
    Ok((train, val))
}

/// Trains a fresh model. See [`train_with`] for a per-epoch callback.
pub fn train(
    manifest: &DatasetManifest,
    model: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with(manifest, model, cfg, |_| {})
}

pub fn train_with(
    manifest: &DatasetManifest,
    model: &ModelConfig,
    cfg: &TrainConfig,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    train_from(build_model::<f32>(model)?, manifest, cfg, on_epoch)
}

/// Continues training from existing parameters.
pub fn train_from(
    mut params: ParameterSet<f32>,
    manifest: &DatasetManifest,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_classes(&params, manifest)?;
    let (train_set, val_set) = prepare_splits(manifest, cfg)?;
    let size = params.config().input_size;

    let mut adam = match cfg.optimizer {
        OptimizerKind::Adam => Some(adam_init(&params, AdamConfig::with_lr(cfg.lr))?),
        OptimizerKind::Sgd => None,
    };
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut best_val = f64::INFINITY;
    let mut stale = 0;

    for epoch in 1..=cfg.epochs {
        let shuffle = derive_seed(cfg.seed, &[SHUFFLE_STREAM, epoch as u64]);
        let batches = to_batches::<f32>(&train_set, cfg.batch_size, size, Some(shuffle))?;
        for (b, batch) in batches.iter().enumerate() {
            let (logits, trace) = forward(&params, &batch.images)?;
            let (loss, d_logits) = softmax_xent(&logits, &batch.labels)?;
            if !loss.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite loss {loss} at epoch {epoch}, batch {}",
                    b + 1
                )));
            }
            let mut grads = backward(&params, &trace, &d_logits)?;
            if let Some(max) = cfg.clip_norm {
                clip_grad_norm(&mut grads, max);
            }
            let step = match adam.as_mut() {
                Some(state) => adam_step(state, &mut params, &grads),
                None => sgd_step(&mut params, &grads, cfg.lr),
            };
            step.map_err(|e| {
                Error::Training(format!("update failed at epoch {epoch}, batch {}: {e}", b + 1))
            })?;
        }

        let tr = evaluate_pass(&params, &train_set, cfg.batch_size)?;
        let va = evaluate_pass(&params, &val_set, cfg.batch_size)?;
        if !(tr.loss.is_finite() && va.loss.is_finite()) {
            return Err(Error::Training(format!(
                "non-finite evaluation loss after epoch {epoch}"
            )));
        }
        let record = EpochRecord {
            epoch,
            train_loss: tr.loss,
            train_acc: tr.accuracy(),
            val_loss: va.loss,
            val_acc: va.accuracy(),
        };
        log::info!(
            "epoch {epoch}: train loss {:.4} acc {:.4}, val loss {:.4} acc {:.4}",
            record.train_loss,
            record.train_acc,
            record.val_loss,
            record.val_acc
        );
        on_epoch(&record);
        records.push(record);

        if let Some(patience) = cfg.early_stopping {
            if va.loss < best_val {
                best_val = va.loss;
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    break;
                }
            }
        }
    }

    if let Some(path) = &cfg.log_path {
        write_log(path, &records)?;
    }
    if let Some(path) = &cfg.checkpoint_path {
        let epoch = records.last().map_or(0, |r| r.epoch);
        save_checkpoint(path, &Checkpoint::new(params.clone(), cfg.seed, epoch as u32))?;
    }
    Ok(TrainOutcome {
        params,
        records,
        train_set,
        val_set,
    })
}

pub const LOG_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc";

pub fn format_log(records: &[EpochRecord]) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6}\n",
            r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc
        ));
    }
    out
}

pub fn write_log(path: &Path, records: &[EpochRecord]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Config("no epoch records to write".into()));
    }
    fs::write(path, format_log(records)).map_err(|e| Error::io(path, e))
}
