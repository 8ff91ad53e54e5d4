use std::path::Path;

use dino_core::bases::{BasisKind, ReducedBasisPair};
use dino_core::Matrix;
use serde::{Deserialize, Serialize};

use super::arrays::{find, read_array, write_array, ArrayEntry};
use super::{create_dir, read_manifest, write_manifest};
use crate::error::Result;

pub const FORMAT: &str = "dino-bases";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasesManifest {
    pub format: String,
    pub version: u32,
    pub input_kind: BasisKind,
    pub output_kind: BasisKind,
    pub d_m: usize,
    pub d_q: usize,
    pub input_rank: usize,
    pub output_rank: usize,
    /// Eigenvalues the columns were selected by, when known.
    #[serde(default)]
    pub input_eigenvalues: Vec<f64>,
    #[serde(default)]
    pub output_eigenvalues: Vec<f64>,
    /// Dataset the bases were computed from.
    #[serde(default)]
    pub source: Option<String>,
    pub arrays: Vec<ArrayEntry>,
}

/// Writes `Psi.bin`, `Phi.bin` and `b.bin` plus the manifest.
pub fn save_bases(
    dir: &Path,
    bases: &ReducedBasisPair,
    eigenvalues: (&[f64], &[f64]),
    source: Option<String>,
) -> Result<BasesManifest> {
    create_dir(dir)?;
    let (d_m, r_m) = bases.psi.shape();
    let (d_q, r_q) = bases.phi.shape();
    let arrays = vec![
        write_array(dir, "Psi.bin", &[d_m, r_m], bases.psi.as_slice())?,
        write_array(dir, "Phi.bin", &[d_q, r_q], bases.phi.as_slice())?,
        write_array(dir, "b.bin", &[d_q], &bases.b)?,
    ];
    let manifest = BasesManifest {
        format: FORMAT.into(),
        version: VERSION,
        input_kind: bases.input_kind,
        output_kind: bases.output_kind,
        d_m,
        d_q,
        input_rank: r_m,
        output_rank: r_q,
        input_eigenvalues: eigenvalues.0.to_vec(),
        output_eigenvalues: eigenvalues.1.to_vec(),
        source,
        arrays,
    };
    write_manifest(dir, &manifest)?;
    Ok(manifest)
}

pub fn load_bases(dir: &Path) -> Result<(ReducedBasisPair, BasesManifest)> {
    let man: BasesManifest = read_manifest(dir, FORMAT, VERSION)?;
    let psi = read_array(dir, find(dir, &man.arrays, "Psi.bin", &[man.d_m, man.input_rank])?)?;
    let phi = read_array(dir, find(dir, &man.arrays, "Phi.bin", &[man.d_q, man.output_rank])?)?;
    let b = read_array(dir, find(dir, &man.arrays, "b.bin", &[man.d_q])?)?;
    let pair = ReducedBasisPair::new(
        Matrix::from_vec(man.d_m, man.input_rank, psi),
        Matrix::from_vec(man.d_q, man.output_rank, phi),
        b,
        man.input_kind,
        man.output_kind,
    )?;
    Ok((pair, man))
}
