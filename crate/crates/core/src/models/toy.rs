//! Closed-form map `q = B tanh(C m)` with seeded Gaussian `B`, `C`.

use alloc::vec::Vec;

use crate::linalg::Matrix;
use crate::{math, rng, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ToyConfig {
    pub d_m: usize,
    pub d_q: usize,
    /// Inner width; bounds the Jacobian rank.
    pub p: usize,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig { d_m: 40, d_q: 8, p: 6, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct ToyMap {
    b: Matrix,
    c: Matrix,
}

impl ToyMap {
    /// `B` has `N(0, 1/p)` entries and `C` has `N(0, 1/d_m)` entries.
    pub fn new(cfg: &ToyConfig) -> Result<Self> {
        if cfg.d_m == 0 || cfg.d_q == 0 || cfg.p == 0 {
            return Err(Error::invalid("toy map dimensions must be positive"));
        }
        let mut r = rng::stream(cfg.seed);
        let b = Matrix::from_vec(cfg.d_q, cfg.p, rng::normal_vec(&mut r, cfg.d_q * cfg.p))
            .scaled(1.0 / math::sqrt(cfg.p as f64));
        let c = Matrix::from_vec(cfg.p, cfg.d_m, rng::normal_vec(&mut r, cfg.p * cfg.d_m))
            .scaled(1.0 / math::sqrt(cfg.d_m as f64));
        Ok(ToyMap { b, c })
    }

    pub fn from_factors(b: Matrix, c: Matrix) -> Result<Self> {
        if b.cols() != c.rows() {
            return Err(Error::invalid("toy factors have incompatible shapes"));
        }
        Ok(ToyMap { b, c })
    }

    pub fn outer(&self) -> &Matrix {
        &self.b
    }

    pub fn inner(&self) -> &Matrix {
        &self.c
    }

    pub fn parameter_dim(&self) -> usize {
        self.c.cols()
    }

    pub fn observation_dim(&self) -> usize {
        self.b.rows()
    }

    pub fn width(&self) -> usize {
        self.c.rows()
    }

    pub fn forward(&self, m: &[f64]) -> Vec<f64> {
        let z: Vec<f64> = self.c.matvec(m).into_iter().map(math::tanh).collect();
        self.b.matvec(&z)
    }

    /// `B diag(1 − tanh²(Cm)) C`.
    pub fn jacobian(&self, m: &[f64]) -> Matrix {
        let d: Vec<f64> = self
            .c
            .matvec(m)
            .into_iter()
            .map(|x| {
                let t = math::tanh(x);
                1.0 - t * t
            })
            .collect();
        self.b.scale_columns(&d).matmul(&self.c)
    }
}

/// Value and dense Jacobian of the toy map at `m`.
pub fn toy_map(map: &ToyMap, m: &[f64]) -> Result<(Vec<f64>, Matrix)> {
    if m.len() != map.parameter_dim() {
        return Err(Error::invalid("parameter has the wrong length for the toy map"));
    }
    Ok((map.forward(m), map.jacobian(m)))
}
