#![allow(dead_code)]

use dino_core::bases::{BasisKind, ReducedBasisPair};
use dino_core::datagen::{generate_dataset, Dataset, GenConfig, ProblemConfig};
use dino_core::linalg::orthonormalize;
use dino_core::models::ToyConfig;
use dino_core::netop::{Activation, MlpSpec, NetworkWeights, OperatorModel};
use dino_core::{rng, Matrix};

pub fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
    Matrix::from_vec(rows, cols, rng::normal_vec(&mut rng::stream(seed), rows * cols))
}

pub fn orthonormal(n: usize, k: usize, seed: u64) -> Matrix {
    orthonormalize(&random(n, k, seed))
}

pub fn vector(n: usize, seed: u64) -> Vec<f64> {
    rng::normal_vec(&mut rng::stream(seed), n)
}

pub fn toy(d_m: usize, d_q: usize, p: usize, n: usize, rank: usize, seed: u64) -> Dataset {
    let cfg = ProblemConfig::Toy(ToyConfig { d_m, d_q, p, seed: seed ^ 0x55 });
    let gen = GenConfig { n_samples: n, rank: Some(rank), seed, ..Default::default() };
    generate_dataset(&cfg, &gen).unwrap().0
}

pub fn generic(widths: Vec<usize>, seed: u64) -> OperatorModel {
    let spec = MlpSpec::new(widths, Activation::Softplus).unwrap();
    let w = NetworkWeights::init(&spec, seed);
    OperatorModel::generic(spec, w).unwrap()
}

/// Reduced-basis model with random orthonormal bases and shift.
pub fn random_reduced(d_m: usize, d_q: usize, r_m: usize, r_q: usize, hidden: usize, seed: u64) -> OperatorModel {
    let bases = ReducedBasisPair::new(
        orthonormal(d_m, r_m, seed),
        orthonormal(d_q, r_q, seed + 1),
        vector(d_q, seed + 2),
        BasisKind::Custom,
        BasisKind::Custom,
    )
    .unwrap();
    let spec = MlpSpec::new(vec![r_m, hidden, r_q], Activation::Softplus).unwrap();
    let w = NetworkWeights::init(&spec, seed + 3);
    OperatorModel::reduced(bases, spec, w).unwrap()
}

/// Component of `x` orthogonal to the columns of `q`.
pub fn complement(q: &Matrix, x: &[f64]) -> Vec<f64> {
    let c = q.tr_matvec(x);
    let p = q.matvec(&c);
    x.iter().zip(&p).map(|(a, b)| a - b).collect()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
