//! On-disk formats. Every artifact is a directory holding `manifest.json`
//! and raw little-endian `f64` arrays in row-major order, each listed in the
//! manifest with its shape and CRC32.

mod arrays;
mod bases;
mod dataset;
mod report;
pub mod run;

pub use arrays::{read_array, write_array, ArrayEntry};
pub use bases::{load_bases, save_bases, BasesManifest};
pub use dataset::{load_dataset, save_dataset, DatasetManifest};
pub use report::{save_report, ReportDocument};
pub(crate) use run::rewrite_history;
pub use run::{
    append_history, latest_checkpoint, load_checkpoint, load_history, load_model, load_run_manifest, save_checkpoint,
    save_model, save_run_manifest, Checkpoint, RunManifest,
};

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{io, Error, Result};

pub const MANIFEST: &str = "manifest.json";

pub(crate) fn write_manifest<T: Serialize>(dir: &Path, value: &T) -> Result<()> {
    let path = dir.join(MANIFEST);
    let mut text = serde_json::to_string_pretty(value).map_err(|err| Error::Manifest { path: path.clone(), err })?;
    text.push('\n');
    fs::write(&path, text).map_err(io(&path))
}

/// Reads a manifest after checking its `format` tag and `version`.
pub(crate) fn read_manifest<T: DeserializeOwned>(dir: &Path, format: &str, version: u32) -> Result<T> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(io(&path))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|err| Error::Manifest { path: path.clone(), err })?;
    let found = value.get("format").and_then(|f| f.as_str()).unwrap_or("");
    if found != format {
        return Err(Error::Kind { path, expected: format.into(), found: found.into() });
    }
    let found = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != version {
        return Err(Error::Version { path, found, expected: version });
    }
    serde_json::from_value(value).map_err(|err| Error::Manifest { path, err })
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io(dir))
}
