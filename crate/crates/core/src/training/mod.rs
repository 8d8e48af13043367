//! Composite loss, NAdam, plateau scheduling and the epoch loop.

mod loss;
mod nadam;
mod scheduler;

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{concatenate, Array2, Axis};

use crate::error::{Error, Result};
use crate::featureio::{compute_norm_stats, Dataset, FrameTable};
use crate::metrics::pitch_counts;
use crate::model::{backward, forward, init_params, predict_f0, ModelConfig, ModelParams};
use crate::rng::seeded_permutation;

pub use loss::{bce_with_logits, composite_loss, LossOutput};
pub use nadam::{NadamConfig, NadamState};
pub use scheduler::{SchedulerAction, SchedulerState};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Weight of the voicing BCE term.
    pub alpha: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub patience_lr: usize,
    pub lr_factor: f64,
    pub patience_stop: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 28.112,
            lr: 0.0003,
            batch_size: 262_144,
            patience_lr: 5,
            lr_factor: 0.2,
            patience_stop: 10,
            max_epochs: 200,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lr must be non-negative, got {}",
                self.lr
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if !(self.lr_factor > 0.0 && self.lr_factor < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "lr_factor must lie in (0, 1), got {}",
                self.lr_factor
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_metric: f64,
    /// Learning rate used during this epoch.
    pub lr: f64,
    pub event: SchedulerAction,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

pub const HISTORY_HEADER: &str = "epoch,train_loss,val_metric,lr,event";

impl TrainHistory {
    pub fn best_metric(&self) -> Option<f64> {
        self.epochs.iter().map(|e| e.val_metric).reduce(f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(HISTORY_HEADER);
        s.push('\n');
        for e in &self.epochs {
            let _ = writeln!(s, "{},{},{},{},{}", e.epoch, e.train_loss, e.val_metric, e.lr, e.event);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Raw validation frames pooled across utterances.
pub struct ValidationSet {
    inputs: Array2<f64>,
    truth: Vec<f64>,
}

impl ValidationSet {
    pub fn from_dataset(dataset: &Dataset) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mats = dataset
            .utterances()
            .iter()
            .map(|u| u.input_matrix(None))
            .collect::<Result<Vec<_>>>()?;
        let views: Vec<_> = mats.iter().map(|m| m.view()).collect();
        let inputs = concatenate(Axis(0), &views).map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        let truth = dataset.utterances().iter().flat_map(|u| u.f0_hz()).collect();
        Ok(Self { inputs, truth })
    }

    pub fn num_frames(&self) -> usize {
        self.truth.len()
    }

    /// Pooled accurately-processed fraction of `params` on these frames.
    pub fn accurately_processed(&self, params: &ModelParams) -> Result<f64> {
        let (pred, _) = predict_f0(params, self.inputs.view())?;
        pitch_counts(&pred, &self.truth)?
            .accurately_processed()
            .ok_or(Error::EmptyDataset)
    }
}

/// Normalizes a batch, runs forward/loss/backward and returns the loss and
/// gradients. `dropout_seed` only matters when the model uses dropout.
pub fn batch_gradients(
    params: &ModelParams,
    table: &FrameTable,
    rows: &[usize],
    alpha: f64,
    dropout_seed: u64,
) -> Result<(LossOutput, crate::model::Gradients)> {
    let mut x = Array2::<f64>::zeros((rows.len(), table.input_dim()));
    let mut targets = Vec::with_capacity(rows.len());
    let mut voiced = Vec::with_capacity(rows.len());
    table.gather_normalized(rows, &params.norm, x.view_mut(), &mut targets, &mut voiced);
    let out = forward(params, x.view(), true, dropout_seed)?;
    let loss = composite_loss(
        out.f0hat_norm.as_slice().expect("contiguous"),
        out.logits.as_slice().expect("contiguous"),
        &targets,
        &voiced,
        alpha,
    )?;
    let grads = backward(params, &out.cache, &loss.d_f0hat, &loss.d_logits)?;
    Ok((loss, grads))
}

/// Trains from a seeded initialization and returns the parameters of the
/// epoch with the best validation metric, plus the per-epoch history.
pub fn train(
    train_table: &FrameTable,
    val_dataset: &Dataset,
    model_config: &ModelConfig,
    config: &TrainConfig,
) -> Result<(ModelParams, TrainHistory)> {
    config.validate()?;
    if train_table.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if model_config.input_dim != train_table.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "model input_dim {} vs frame table width {}",
            model_config.input_dim,
            train_table.input_dim()
        )));
    }
    let validation = ValidationSet::from_dataset(val_dataset)?;
    let mut params = init_params(model_config, config.seed)?;
    params.norm = compute_norm_stats(train_table)?;
    let mut history = TrainHistory::default();
    if config.max_epochs == 0 {
        return Ok((params, history));
    }

    let mut optimizer = NadamState::new(&params, NadamConfig::default());
    let mut scheduler = SchedulerState::new(config.lr, config.lr_factor, config.patience_lr, config.patience_stop);
    let mut best = (f64::NEG_INFINITY, params.clone());

    for epoch in 0..config.max_epochs {
        let lr = scheduler.current_lr;
        let perm = seeded_permutation(train_table.len(), config.seed.wrapping_add(epoch as u64));
        let mut loss_sum = 0.0;
        for (b, rows) in perm.chunks(config.batch_size).enumerate() {
            let dropout_seed = config
                .seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(((epoch as u64) << 32) | b as u64);
            let (loss, grads) = batch_gradients(&params, train_table, rows, config.alpha, dropout_seed)?;
            loss_sum += loss.loss * rows.len() as f64;
            optimizer.step(&mut params, &grads, lr)?;
        }
        let train_loss = loss_sum / train_table.len() as f64;
        let val_metric = validation.accurately_processed(&params)?;
        if val_metric > best.0 {
            best = (val_metric, params.clone());
        }
        let event = scheduler.update(val_metric);
        history.epochs.push(EpochRecord {
            epoch: epoch + 1,
            train_loss,
            val_metric,
            lr,
            event,
        });
        log::debug!(
            "epoch {} loss {train_loss:.6} val {val_metric:.4} lr {lr:e} {event}",
            epoch + 1
        );
        if event == SchedulerAction::Stop {
            break;
        }
    }
    Ok((best.1, history))
}
