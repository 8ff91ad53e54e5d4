//! The generate → bases → train → eval steps as library calls.

use std::path::{Path, PathBuf};
use std::time::Instant;

use dino_core::bases::{active_subspace, derivative_output_basis, pca_basis, ReducedBasisPair};
use dino_core::datagen::{reduce_dataset, Dataset, ReducedDataset};
use dino_core::netop::{Activation, MlpSpec, NetworkWeights, OperatorModel};
use dino_core::training::{self, AdamState, EpochRecord, TrainConfig, TrainObserver, TrainingData};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Parallel;
use crate::io::{self, RunManifest};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Arch {
    /// Latent network between frozen derivative-informed (or PCA) bases.
    Dipnet,
    /// Dense network acting on the full parameter vector.
    Generic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BasesMethod {
    /// Active subspace inputs, derivative-informed outputs.
    Derivative,
    Pca,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub arch: Arch,
    pub hidden_layers: usize,
    pub width: usize,
    pub activation: Activation,
    pub init_seed: u64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig { arch: Arch::Dipnet, hidden_layers: 6, width: 50, activation: Activation::Softplus, init_seed: 0 }
    }
}

/// Freshly initialized model. DIPNet needs `bases`; the generic network ignores them.
pub fn build_model(cfg: &ArchConfig, d_m: usize, d_q: usize, bases: Option<ReducedBasisPair>) -> Result<OperatorModel> {
    match (cfg.arch, bases) {
        (Arch::Dipnet, Some(b)) => {
            if b.input_dim() != d_m || b.output_dim() != d_q {
                return Err(Error::Invalid(format!(
                    "bases map {} -> {}, the data has d_M = {d_m}, d_Q = {d_q}",
                    b.input_dim(),
                    b.output_dim()
                )));
            }
            let spec = MlpSpec::uniform(b.input_rank(), cfg.width, cfg.hidden_layers, b.output_rank(), cfg.activation)?;
            let w = NetworkWeights::init(&spec, cfg.init_seed);
            Ok(OperatorModel::reduced(b, spec, w)?)
        }
        (Arch::Dipnet, None) => Err(Error::Invalid("the dipnet architecture needs bases (--bases)".into())),
        (Arch::Generic, _) => {
            let spec = MlpSpec::uniform(d_m, cfg.width, cfg.hidden_layers, d_q, cfg.activation)?;
            let w = NetworkWeights::init(&spec, cfg.init_seed);
            Ok(OperatorModel::generic(spec, w)?)
        }
    }
}

/// Bases of the requested kind together with their selecting eigenvalues.
pub fn compute_bases(
    ds: &Dataset,
    method: BasesMethod,
    input_rank: usize,
    output_rank: usize,
) -> Result<(ReducedBasisPair, Vec<f64>, Vec<f64>)> {
    let (psi, phi, b) = match method {
        BasesMethod::Derivative => {
            let psi = active_subspace(ds, input_rank)?;
            let phi = derivative_output_basis(ds, output_rank)?;
            let n = ds.len() as f64;
            let mean = (0..ds.d_q()).map(|j| (0..ds.len()).map(|i| ds.q[(i, j)]).sum::<f64>() / n).collect();
            (psi, phi, mean)
        }
        BasesMethod::Pca => {
            let (psi, _) = pca_basis(&ds.m, input_rank)?;
            let (phi, mean) = pca_basis(&ds.q, output_rank)?;
            (psi, phi, mean)
        }
    };
    let pair = ReducedBasisPair::new(psi.vectors, phi.vectors, b, psi.kind, phi.kind)?;
    Ok((pair, psi.eigenvalues, phi.eigenvalues))
}

/// Training data in the layout the model consumes: reduced coordinates for
/// reduced-basis models, full space otherwise.
pub enum PreparedData<'a> {
    Full(&'a Dataset),
    Reduced(ReducedDataset),
}

impl PreparedData<'_> {
    pub fn prepare<'a>(model: &OperatorModel, ds: &'a Dataset) -> Result<PreparedData<'a>> {
        if ds.d_m() != model.input_dim() || ds.d_q() != model.output_dim() {
            return Err(Error::Invalid(format!(
                "model maps {} -> {}, the data has d_M = {}, d_Q = {}",
                model.input_dim(),
                model.output_dim(),
                ds.d_m(),
                ds.d_q()
            )));
        }
        Ok(match model.bases() {
            Some(b) => PreparedData::Reduced(reduce_dataset(ds, b)?),
            None => PreparedData::Full(ds),
        })
    }

    pub fn as_training(&self) -> TrainingData<'_> {
        match self {
            PreparedData::Full(d) => TrainingData::Full(d),
            PreparedData::Reduced(r) => TrainingData::Reduced(r),
        }
    }
}

/// Where and how a run is persisted.
pub struct RunDir {
    pub path: PathBuf,
    pub manifest: RunManifest,
    /// Checkpoint cadence in epochs; the last epoch is always checkpointed.
    pub checkpoint_every: usize,
    /// Continue from the newest checkpoint in `path`, if any.
    pub resume: bool,
}

struct Observer<'a> {
    dir: Option<&'a Path>,
    every: usize,
    epochs: usize,
    start: Instant,
    offset: f64,
    verbose: bool,
    failure: Option<Error>,
}

impl TrainObserver for Observer<'_> {
    fn elapsed(&self) -> f64 {
        self.offset + self.start.elapsed().as_secs_f64()
    }

    fn on_epoch(&mut self, record: &EpochRecord, model: &OperatorModel, adam: &AdamState) -> dino_core::Result<()> {
        if self.verbose {
            match record.held_out_loss {
                Some(h) => eprintln!("epoch {:>4}  train {:.6e}  held-out {:.6e}", record.epoch + 1, record.train_loss, h),
                None => eprintln!("epoch {:>4}  train {:.6e}", record.epoch + 1, record.train_loss),
            }
        }
        let Some(dir) = self.dir else { return Ok(()) };
        let done = record.epoch + 1;
        let write = || -> Result<()> {
            io::append_history(dir, record)?;
            if done == self.epochs || (self.every > 0 && done % self.every == 0) {
                io::save_checkpoint(dir, done, &model.weights, adam)?;
            }
            Ok(())
        };
        write().map_err(|e| {
            let msg = e.to_string();
            self.failure = Some(e);
            dino_core::Error::InvalidArgument(msg)
        })
    }
}

/// Everything a training run needs besides the output location.
pub struct TrainRequest<'a> {
    pub model: OperatorModel,
    pub data: &'a Dataset,
    pub test: Option<&'a Dataset>,
    pub config: TrainConfig,
    pub verbose: bool,
}

/// Trains on the current rayon pool. With a run directory, history and
/// checkpoints are written as training proceeds and the final model is saved.
pub fn train(req: TrainRequest<'_>, run: Option<RunDir>) -> Result<(OperatorModel, Vec<EpochRecord>)> {
    let mut model = req.model;
    let data = PreparedData::prepare(&model, req.data)?;
    let test = req.test.map(|t| PreparedData::prepare(&model, t)).transpose()?;
    let mut adam = AdamState::new(req.config.adam, model.weights.len());
    let mut history = Vec::new();
    let mut start_epoch = 0;

    if let Some(run) = &run {
        if run.resume {
            if let Some(ck) = io::latest_checkpoint(&run.path)? {
                let (epochs, weights, state) = io::load_checkpoint(&ck, &model.spec)?;
                model.weights = weights;
                adam = state;
                start_epoch = epochs;
                history = io::load_history(&run.path)?;
                history.truncate(epochs);
                if history.len() != epochs {
                    return Err(Error::Invalid(format!(
                        "{}: history has {} records, checkpoint is at epoch {epochs}",
                        run.path.display(),
                        history.len()
                    )));
                }
            }
        }
        io::save_run_manifest(&run.path, &run.manifest)?;
        io::rewrite_history(&run.path, &history)?;
    }

    let mut observer = Observer {
        dir: run.as_ref().map(|r| r.path.as_path()),
        every: run.as_ref().map_or(0, |r| r.checkpoint_every),
        epochs: req.config.epochs,
        start: Instant::now(),
        offset: history.last().map_or(0.0, |r| r.wall_time),
        verbose: req.verbose,
        failure: None,
    };
    let held_out = test.as_ref().map(|t| t.as_training());
    let result = training::train(
        &mut model,
        &mut adam,
        &data.as_training(),
        held_out.as_ref(),
        &req.config,
        start_epoch,
        &Parallel,
        &mut observer,
    );
    if let Some(e) = observer.failure.take() {
        return Err(e);
    }
    history.extend(result?.epochs);

    if let Some(mut run) = run {
        io::save_model(&run.path, &mut run.manifest, &model)?;
    }
    Ok((model, history))
}
