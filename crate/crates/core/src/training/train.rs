use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::loss::{loss_and_grad, subsample_indices, Executor, LossConfig, LossVariant, MsIndices, MsRedraw, Sequential, TrainingData};
use crate::netop::OperatorModel;
use crate::{rng, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub loss: LossConfig,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 100, batch_size: 32, seed: 0, loss: LossConfig::default(), adam: AdamConfig::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    /// Zero-based epoch index.
    pub epoch: usize,
    /// Sample-weighted mean of the batch losses seen during the epoch.
    pub train_loss: f64,
    pub held_out_loss: Option<f64>,
    /// Seconds since training started, as reported by the observer.
    pub wall_time: f64,
}

/// Per-epoch records plus the seed every random stream was derived from.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainHistory {
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    /// Streams are ChaCha8; epoch `e` shuffles with sub-stream `2e` and
    /// draws subsample indices from sub-stream `2e + 1`.
    pub const RNG: &'static str = "chacha8, shuffle = seed ^ splitmix64(2e), subsampling = seed ^ splitmix64(2e+1)";
}

/// Hooks into the training loop: a clock for wall times and a callback
/// after every epoch (checkpointing, logging).
pub trait TrainObserver {
    fn elapsed(&self) -> f64 {
        0.0
    }

    fn on_epoch(&mut self, _record: &EpochRecord, _model: &OperatorModel, _adam: &AdamState) -> Result<()> {
        Ok(())
    }
}

/// Observer that does nothing.
pub struct Silent;

impl TrainObserver for Silent {}

fn shuffled(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(rng::derive_seed(seed, 2 * epoch as u64)));
    order
}

/// Mean loss over a whole dataset with the given subsampling draws.
pub fn dataset_loss(
    model: &OperatorModel,
    data: &TrainingData<'_>,
    cfg: &LossConfig,
    seed: u64,
    exec: &dyn Executor,
) -> Result<f64> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let ms = draw_all(data, cfg, &idx, &mut rng::stream(seed))?;
    Ok(loss_and_grad(model, data, &idx, cfg, ms.as_deref(), exec)?.loss)
}

fn draw_all(
    data: &TrainingData<'_>,
    cfg: &LossConfig,
    samples: &[usize],
    rng: &mut rng::StreamRng,
) -> Result<Option<Vec<MsIndices>>> {
    if cfg.variant != LossVariant::H1TruncatedMs {
        return Ok(None);
    }
    samples
        .iter()
        .map(|&i| {
            let r = data.rank(i).ok_or_else(|| Error::invalid("matrix subsampling needs Jacobian data"))?;
            subsample_indices(r, cfg.k, cfg.ms_mode, rng)
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// Trains `model` in place for epochs `start_epoch..cfg.epochs`.
///
/// Epoch `e` depends only on the seed and `e`, so resuming from a checkpoint
/// written after epoch `e − 1` reproduces an uninterrupted run exactly.
#[allow(clippy::too_many_arguments)]
pub fn train(
    model: &mut OperatorModel,
    adam: &mut AdamState,
    data: &TrainingData<'_>,
    held_out: Option<&TrainingData<'_>>,
    cfg: &TrainConfig,
    start_epoch: usize,
    exec: &dyn Executor,
    observer: &mut dyn TrainObserver,
) -> Result<TrainHistory> {
    let n = data.len();
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    if n == 0 && cfg.epochs > start_epoch {
        return Err(Error::invalid("training set is empty"));
    }
    if adam.m.len() != model.weights.len() {
        return Err(Error::invalid("optimizer state does not match the model"));
    }
    if cfg.loss.needs_jacobians() && data.min_rank().is_none() && n > 0 {
        return Err(Error::invalid("this loss needs Jacobian data, but the training set has none"));
    }
    cfg.loss.validate(if cfg.loss.needs_jacobians() { data.min_rank() } else { None })?;

    let mut history = TrainHistory { seed: cfg.seed, epochs: Vec::new() };
    for epoch in start_epoch..cfg.epochs {
        let wrap = |batch: usize| move |e: Error| Error::Training { epoch, batch, source: Box::new(e) };
        let order = shuffled(n, cfg.seed, epoch);
        let mut ms_rng = rng::stream(rng::derive_seed(cfg.seed, 2 * epoch as u64 + 1));
        let epoch_draws = match cfg.loss.ms_redraw {
            MsRedraw::PerEpoch => draw_all(data, &cfg.loss, &(0..n).collect::<Vec<_>>(), &mut ms_rng).map_err(wrap(0))?,
            MsRedraw::PerBatch => None,
        };
        let mut total = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let ms = match &epoch_draws {
                Some(all) => Some(batch.iter().map(|&i| all[i].clone()).collect()),
                None => draw_all(data, &cfg.loss, batch, &mut ms_rng).map_err(wrap(b))?,
            };
            let out = loss_and_grad(model, data, batch, &cfg.loss, ms.as_deref(), exec).map_err(wrap(b))?;
            if !out.loss.is_finite() {
                return Err(wrap(b)(Error::NonFinite("batch loss".into())));
            }
            adam_step(adam, model.weights.as_mut_slice(), &out.grad).map_err(wrap(b))?;
            total += out.loss * batch.len() as f64;
        }
        let held_out_loss = match held_out {
            Some(h) => Some(
                dataset_loss(model, h, &cfg.loss, rng::derive_seed(cfg.seed, u64::MAX - epoch as u64), exec)
                    .map_err(|e| Error::Training { epoch, batch: 0, source: Box::new(e) })?,
            ),
            None => None,
        };
        let record = EpochRecord { epoch, train_loss: total / n as f64, held_out_loss, wall_time: observer.elapsed() };
        observer.on_epoch(&record, model, adam)?;
        history.epochs.push(record);
    }
    Ok(history)
}

/// Fresh Adam state, sequential execution, no observer.
pub fn train_model(model: &OperatorModel, data: &TrainingData<'_>, cfg: &TrainConfig) -> Result<(OperatorModel, TrainHistory)> {
    let mut trained = model.clone();
    let mut adam = AdamState::new(cfg.adam, model.weights.len());
    let history = train(&mut trained, &mut adam, data, None, cfg, 0, &Sequential, &mut Silent)?;
    Ok((trained, history))
}
