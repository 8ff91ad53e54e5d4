use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{io, Error, Result};

/// A binary array listed in a manifest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayEntry {
    pub file: String,
    pub shape: Vec<usize>,
    pub crc32: u32,
}

impl ArrayEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn to_bytes(data: &[f64]) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(data.len() * 8);
    for x in data {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    bytes
}

/// Writes `data` to `dir/file` and returns its manifest entry.
pub fn write_array(dir: &Path, file: &str, shape: &[usize], data: &[f64]) -> Result<ArrayEntry> {
    if shape.iter().product::<usize>() != data.len() {
        return Err(Error::Invalid(format!("{file}: shape {shape:?} does not match {} values", data.len())));
    }
    let bytes = to_bytes(data);
    let path = dir.join(file);
    fs::write(&path, &bytes).map_err(io(&path))?;
    Ok(ArrayEntry { file: file.into(), shape: shape.to_vec(), crc32: crc32fast::hash(&bytes) })
}

/// Reads the array described by `entry`, checking length and checksum.
pub fn read_array(dir: &Path, entry: &ArrayEntry) -> Result<Vec<f64>> {
    let path = dir.join(&entry.file);
    let bytes = fs::read(&path).map_err(io(&path))?;
    let expected = entry.len() as u64 * 8;
    if bytes.len() as u64 != expected {
        return Err(Error::Length { path, expected, found: bytes.len() as u64 });
    }
    let found = crc32fast::hash(&bytes);
    if found != entry.crc32 {
        return Err(Error::Checksum { path, expected: entry.crc32, found });
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

pub(crate) fn find<'a>(dir: &Path, entries: &'a [ArrayEntry], file: &str, shape: &[usize]) -> Result<&'a ArrayEntry> {
    let entry = entries
        .iter()
        .find(|e| e.file == file)
        .ok_or_else(|| Error::Invalid(format!("{}: manifest lists no array '{file}'", dir.display())))?;
    if entry.shape != shape {
        return Err(Error::Invalid(format!(
            "{}: array '{file}' has shape {:?}, the manifest metadata implies {shape:?}",
            dir.display(),
            entry.shape
        )));
    }
    Ok(entry)
}
