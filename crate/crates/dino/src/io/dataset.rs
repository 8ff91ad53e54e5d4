use std::path::Path;

use dino_core::datagen::{Dataset, DatasetMeta};
use dino_core::{Matrix, TruncatedJacobian};
use serde::{Deserialize, Serialize};

use super::arrays::{find, read_array, write_array, ArrayEntry};
use super::{create_dir, read_manifest, write_manifest};
use crate::error::{Error, Result};

pub const FORMAT: &str = "dino-dataset";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    #[serde(flatten)]
    pub meta: DatasetMeta,
    pub arrays: Vec<ArrayEntry>,
}

fn shapes(meta: &DatasetMeta) -> [(&'static str, Vec<usize>); 5] {
    let (n, d_m, d_q, r) = (meta.n_samples, meta.d_m, meta.d_q, meta.rank);
    [
        ("m.bin", vec![n, d_m]),
        ("q.bin", vec![n, d_q]),
        ("jac_U.bin", vec![n, d_q, r]),
        ("jac_sigma.bin", vec![n, r]),
        ("jac_V.bin", vec![n, d_m, r]),
    ]
}

/// Writes `ds` to `dir`, creating it if needed.
pub fn save_dataset(dir: &Path, ds: &Dataset) -> Result<DatasetManifest> {
    ds.validate()?;
    create_dir(dir)?;
    let meta = DatasetMeta { n_samples: ds.len(), ..ds.meta };
    let mut u = Vec::with_capacity(ds.len() * meta.d_q * meta.rank);
    let mut sigma = Vec::with_capacity(ds.len() * meta.rank);
    let mut v = Vec::with_capacity(ds.len() * meta.d_m * meta.rank);
    for j in &ds.jac {
        u.extend_from_slice(j.u.as_slice());
        sigma.extend_from_slice(&j.sigma);
        v.extend_from_slice(j.v.as_slice());
    }
    let data: [&[f64]; 5] = [ds.m.as_slice(), ds.q.as_slice(), &u, &sigma, &v];
    let arrays = shapes(&meta)
        .iter()
        .zip(data)
        .map(|((file, shape), values)| write_array(dir, file, shape, values))
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest { format: FORMAT.into(), version: VERSION, meta, arrays };
    write_manifest(dir, &manifest)?;
    Ok(manifest)
}

/// Reads a dataset, validating the manifest against every array.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest: DatasetManifest = read_manifest(dir, FORMAT, VERSION)?;
    let meta = manifest.meta;
    if meta.rank == 0 || meta.rank > meta.d_q.min(meta.d_m) {
        return Err(Error::Invalid(format!(
            "{}: stored rank {} must lie in 1..={} (d_M = {}, d_Q = {})",
            dir.display(),
            meta.rank,
            meta.d_q.min(meta.d_m),
            meta.d_m,
            meta.d_q
        )));
    }
    let mut arrays = Vec::with_capacity(5);
    for (file, shape) in shapes(&meta) {
        arrays.push(read_array(dir, find(dir, &manifest.arrays, file, &shape)?)?);
    }
    let [m, q, u, sigma, v]: [Vec<f64>; 5] = arrays.try_into().unwrap();
    let (n, d_m, d_q, r) = (meta.n_samples, meta.d_m, meta.d_q, meta.rank);
    let jac = (0..n)
        .map(|i| TruncatedJacobian {
            u: Matrix::from_vec(d_q, r, u[i * d_q * r..(i + 1) * d_q * r].to_vec()),
            sigma: sigma[i * r..(i + 1) * r].to_vec(),
            v: Matrix::from_vec(d_m, r, v[i * d_m * r..(i + 1) * d_m * r].to_vec()),
        })
        .collect();
    let ds = Dataset { meta, m: Matrix::from_vec(n, d_m, m), q: Matrix::from_vec(n, d_q, q), jac };
    ds.validate().map_err(|e| Error::Invalid(format!("{}: {e}", dir.display())))?;
    Ok(ds)
}
