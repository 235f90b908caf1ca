//! Cross-entropy training with Adam, early stopping on validation loss and
//! resumable checkpoints.
//!
//! ```
//! use csi_har::training::EarlyStopping;
//!
//! let mut stop = EarlyStopping::new(3, 1e-6);
//! let losses = [1.0, 0.9, 0.95, 0.96, 0.97];
//! let mut last = 0;
//! for (i, &loss) in losses.iter().enumerate() {
//!     stop.observe(i + 1, loss);
//!     last = i + 1;
//!     if stop.should_stop() {
//!         break;
//!     }
//! }
//! assert_eq!((last, stop.best_epoch()), (5, Some(2)));
//! ```

mod checkpoint;
mod optim;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{stack_samples, CsiSample, Dataset, Split};
use crate::error::{Error, Result};
use crate::models::{Model, FORWARD_CHUNK};
use crate::tensor::{Graph, Tensor};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, ResumeState, CHECKPOINT_VERSION};
pub use optim::{adam_step, clip_grad_norm, cross_entropy, AdamState, EarlyStopping, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Patience,
    MaxEpochs,
    /// A loss or gradient became non-finite.
    Diverged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Percent.
    pub val_acc: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 0 when no epoch improved on the initial parameters.
    pub best_epoch: usize,
    pub stop_reason: Option<StopReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl TrainHistory {
    pub const CSV_HEADER: &'static str = "epoch,train_loss,val_loss,val_acc";

    /// Flat CSV, four decimals.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for r in &self.epochs {
            out.push_str(&format!(
                "{},{:.4},{:.4},{:.4}\n",
                r.epoch, r.train_loss, r.val_loss, r.val_acc
            ));
        }
        out
    }

    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.iter().find(|r| r.epoch == self.best_epoch)
    }
}

/// Best checkpoint and the full history of a run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: TrainHistory,
}

/// Mean cross-entropy and accuracy (percent) of `model` on `samples`,
/// plus per-sample predictions.
pub fn evaluate_samples(model: &Model, samples: &[CsiSample]) -> Result<(f64, f64, Vec<usize>)> {
    if samples.is_empty() {
        return Err(Error::Config("cannot evaluate an empty split".into()));
    }
    let mut loss = 0.0;
    let mut preds = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(FORWARD_CHUNK) {
        let labels: Vec<usize> = chunk.iter().map(|s| s.label).collect();
        let g = Graph::new();
        let params = model.bind(&g, false);
        let logits = model.logits(&params, g.constant(stack_samples(chunk)?))?;
        preds.extend(logits.value().argmax_rows());
        loss += logits.cross_entropy_with_logits(&labels)?.value().item()? * chunk.len() as f64;
    }
    let correct = preds.iter().zip(samples).filter(|(p, s)| **p == s.label).count();
    Ok((
        loss / samples.len() as f64,
        100.0 * correct as f64 / samples.len() as f64,
        preds,
    ))
}

/// Loss and parameter gradients for one batch.
pub fn batch_gradients(model: &Model, batch: &[&CsiSample]) -> Result<(f64, Vec<Tensor>)> {
    let labels: Vec<usize> = batch.iter().map(|s| s.label).collect();
    let g = Graph::new();
    let params = model.bind(&g, true);
    let x = g.constant(stack_samples(batch.iter().copied())?);
    let loss = model.logits(&params, x)?.cross_entropy_with_logits(&labels)?;
    let value = loss.value().item()?;
    let mut grads = g.backward(loss)?;
    let grads = params
        .iter()
        .zip(model.params().tensors())
        .map(|(&p, t)| grads.take(p).unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();
    Ok((value, grads))
}

fn run_epoch(
    model: &mut Model,
    adam: &mut AdamState,
    train: &[CsiSample],
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<f64> {
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed().wrapping_add(epoch as u64));
    order.shuffle(&mut rng);
    let mut total = 0.0;
    for idx in order.chunks(cfg.batch_size) {
        let batch: Vec<&CsiSample> = idx.iter().map(|&i| &train[i]).collect();
        let (loss, mut grads) = batch_gradients(model, &batch)?;
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("training loss became {loss}")));
        }
        if let Some(max) = cfg.clip_grad_norm {
            clip_grad_norm(&mut grads, max);
        }
        adam_step(model.params_mut(), &grads, adam, cfg)?;
        total += loss * batch.len() as f64;
    }
    Ok(total / train.len() as f64)
}

fn splits(data: &Dataset) -> Result<(&[CsiSample], &[CsiSample])> {
    let get = |s: Split| {
        data.split(s)
            .filter(|v| !v.is_empty())
            .ok_or_else(|| Error::Config(format!("dataset {} has no {s} samples", data.name)))
    };
    Ok((get(Split::Train)?, get(Split::Val)?))
}

/// Train from freshly initialized parameters.
pub fn train(model: Model, data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(model, data, cfg, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with(
    model: Model,
    data: &Dataset,
    cfg: &TrainConfig,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    let state = ResumeState {
        epoch: 0,
        adam: AdamState::new(model.params()),
        params: model.params().clone(),
        stopper: EarlyStopping::new(cfg.early_stop_patience, cfg.min_delta),
    };
    let start = Checkpoint {
        model,
        epoch: 0,
        classes: data.classes.clone(),
        pipeline: data.preprocessing.clone(),
        history: TrainHistory::default(),
        resume: Some(state),
    };
    resume_with(&start, data, cfg, on_epoch)
}

/// Continue a run from the resume state stored in `ckpt`. With the same
/// data and config the result equals the uninterrupted run.
pub fn resume(ckpt: &Checkpoint, data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    resume_with(ckpt, data, cfg, |_| {})
}

pub fn resume_with(
    ckpt: &Checkpoint,
    data: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (train_set, val_set) = splits(data)?;
    let state = ckpt
        .resume
        .clone()
        .ok_or_else(|| Error::Contract("checkpoint carries no resume state".into()))?;
    let mut model = Model::from_params(ckpt.model.config().clone(), state.params)?;
    let mut adam = state.adam;
    let mut stopper = state.stopper;
    stopper.patience = cfg.early_stop_patience;
    stopper.min_delta = cfg.min_delta;
    let mut best = ckpt.model.clone();
    let mut history = ckpt.history.clone();
    history.stop_reason = None;
    history.failure = None;
    let mut last_epoch = state.epoch;

    let mut reason = StopReason::MaxEpochs;
    for epoch in state.epoch + 1..=cfg.max_epochs {
        let before = (model.clone(), adam.clone());
        let step = run_epoch(&mut model, &mut adam, train_set, cfg, epoch)
            .and_then(|train_loss| {
                let (val_loss, val_acc, _) = evaluate_samples(&model, val_set)?;
                if !val_loss.is_finite() {
                    return Err(Error::Numerical(format!("validation loss became {val_loss}")));
                }
                Ok((train_loss, val_loss, val_acc))
            });
        let (train_loss, val_loss, val_acc) = match step {
            Ok(v) => v,
            Err(Error::Numerical(msg)) => {
                (model, adam) = before;
                history.failure = Some(format!("epoch {epoch}: {msg}"));
                reason = StopReason::Diverged;
                break;
            }
            Err(e) => return Err(e),
        };
        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_acc,
        };
        on_epoch(&record);
        history.epochs.push(record);
        last_epoch = epoch;
        if stopper.observe(epoch, val_loss) {
            best = model.clone();
            history.best_epoch = epoch;
        }
        if stopper.should_stop() {
            reason = StopReason::Patience;
            break;
        }
    }
    history.stop_reason = Some(reason);
    let checkpoint = Checkpoint {
        model: best,
        epoch: history.best_epoch,
        classes: ckpt.classes.clone(),
        pipeline: ckpt.pipeline.clone(),
        history: history.clone(),
        resume: Some(ResumeState {
            epoch: last_epoch,
            params: model.into_params(),
            adam,
            stopper,
        }),
    };
    Ok(TrainOutcome { checkpoint, history })
}
