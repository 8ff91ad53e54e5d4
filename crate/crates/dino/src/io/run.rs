use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use dino_core::netop::{MlpSpec, NetworkWeights, OperatorModel};
use dino_core::training::{AdamConfig, AdamState, EpochRecord, TrainConfig};
use serde::{Deserialize, Serialize};

use super::arrays::{find, read_array, write_array, ArrayEntry};
use super::bases::{load_bases, save_bases};
use super::{create_dir, read_manifest, write_manifest};
use crate::error::{io, Error, Result};
use crate::pipeline::Arch;

pub const FORMAT: &str = "dino-run";
pub const CHECKPOINT_FORMAT: &str = "dino-checkpoint";
pub const VERSION: u32 = 1;
pub const HISTORY: &str = "history.jsonl";

/// Effective configuration of a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub version: u32,
    pub arch: Arch,
    pub spec: MlpSpec,
    pub init_seed: u64,
    pub train: TrainConfig,
    pub data: String,
    pub test_data: Option<String>,
    pub bases: Option<String>,
    pub checkpoint_every: usize,
    /// Present once training has finished.
    #[serde(default)]
    pub weights: Option<ArrayEntry>,
}

pub fn save_run_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    create_dir(dir)?;
    write_manifest(dir, manifest)
}

pub fn load_run_manifest(dir: &Path) -> Result<RunManifest> {
    read_manifest(dir, FORMAT, VERSION)
}

/// Writes the final weights (and, for reduced models, a copy of the bases)
/// and records them in the run manifest.
pub fn save_model(dir: &Path, manifest: &mut RunManifest, model: &OperatorModel) -> Result<()> {
    create_dir(dir)?;
    manifest.weights = Some(write_array(dir, "weights.bin", &[model.weights.len()], model.weights.as_slice())?);
    if let Some(b) = model.bases() {
        save_bases(&dir.join("bases"), b, (&[], &[]), manifest.bases.clone())?;
    }
    write_manifest(dir, manifest)
}

pub fn load_model(dir: &Path) -> Result<(OperatorModel, RunManifest)> {
    let manifest = load_run_manifest(dir)?;
    let entry = manifest
        .weights
        .as_ref()
        .ok_or_else(|| Error::Invalid(format!("{}: run has no final weights (training unfinished?)", dir.display())))?;
    let weights = load_weights(dir, &manifest.spec, entry)?;
    let model = match manifest.arch {
        Arch::Generic => OperatorModel::generic(manifest.spec.clone(), weights)?,
        Arch::Dipnet => OperatorModel::reduced(load_bases(&dir.join("bases"))?.0, manifest.spec.clone(), weights)?,
    };
    Ok((model, manifest))
}

fn load_weights(dir: &Path, spec: &MlpSpec, entry: &ArrayEntry) -> Result<NetworkWeights> {
    let entry = find(dir, std::slice::from_ref(entry), &entry.file, &[spec.parameter_count()])?;
    Ok(NetworkWeights::from_vec(spec, read_array(dir, entry)?)?)
}

/// Model weights and optimizer state after `epochs` completed epochs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub adam_step: u64,
    pub arrays: Vec<ArrayEntry>,
}

fn checkpoint_dir(run: &Path, epochs: usize) -> PathBuf {
    run.join("checkpoints").join(format!("epoch_{epochs:05}"))
}

pub fn save_checkpoint(run: &Path, epochs: usize, weights: &NetworkWeights, adam: &AdamState) -> Result<PathBuf> {
    let dir = checkpoint_dir(run, epochs);
    create_dir(&dir)?;
    let n = weights.len();
    let arrays = vec![
        write_array(&dir, "weights.bin", &[n], weights.as_slice())?,
        write_array(&dir, "adam_m.bin", &[n], &adam.m)?,
        write_array(&dir, "adam_v.bin", &[n], &adam.v)?,
    ];
    let ck = Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        version: VERSION,
        epochs,
        adam: adam.config,
        adam_step: adam.step,
        arrays,
    };
    write_manifest(&dir, &ck)?;
    Ok(dir)
}

pub fn load_checkpoint(dir: &Path, spec: &MlpSpec) -> Result<(usize, NetworkWeights, AdamState)> {
    let ck: Checkpoint = read_manifest(dir, CHECKPOINT_FORMAT, VERSION)?;
    let n = spec.parameter_count();
    let weights = NetworkWeights::from_vec(spec, read_array(dir, find(dir, &ck.arrays, "weights.bin", &[n])?)?)?;
    let m = read_array(dir, find(dir, &ck.arrays, "adam_m.bin", &[n])?)?;
    let v = read_array(dir, find(dir, &ck.arrays, "adam_v.bin", &[n])?)?;
    Ok((ck.epochs, weights, AdamState { config: ck.adam, step: ck.adam_step, m, v }))
}

/// Directory of the checkpoint with the most completed epochs.
pub fn latest_checkpoint(run: &Path) -> Result<Option<PathBuf>> {
    let root = run.join("checkpoints");
    if !root.exists() {
        return Ok(None);
    }
    let mut best: Option<PathBuf> = None;
    for entry in fs::read_dir(&root).map_err(io(&root))? {
        let path = entry.map_err(io(&root))?.path();
        if path.join(super::MANIFEST).exists() && best.as_ref().map_or(true, |b| path > *b) {
            best = Some(path);
        }
    }
    Ok(best)
}

pub fn append_history(run: &Path, record: &EpochRecord) -> Result<()> {
    let path = run.join(HISTORY);
    let mut f = fs::OpenOptions::new().create(true).append(true).open(&path).map_err(io(&path))?;
    let line = serde_json::to_string(record).map_err(|err| Error::Manifest { path: path.clone(), err })?;
    writeln!(f, "{line}").map_err(io(&path))
}

pub fn load_history(run: &Path) -> Result<Vec<EpochRecord>> {
    let path = run.join(HISTORY);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(&path).map_err(io(&path))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|err| Error::Manifest { path: path.clone(), err }))
        .collect()
}

/// Rewrites the history file with `records` only.
pub(crate) fn rewrite_history(run: &Path, records: &[EpochRecord]) -> Result<()> {
    let path = run.join(HISTORY);
    let _ = fs::remove_file(&path);
    records.iter().try_for_each(|r| append_history(run, r))
}
