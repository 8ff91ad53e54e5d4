use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::Grid;
use crate::linalg::{BandedLu, BandedMatrix};
use crate::{rng, Error, Result};

/// Parameters of the Gaussian prior `N(0, A⁻²)` with `A = δI − γΔ_h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriorConfig {
    pub delta: f64,
    pub gamma: f64,
    pub grid: Grid,
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) || !(self.gamma >= 0.0) {
            return Err(Error::invalid(format!(
                "prior needs delta > 0 and gamma >= 0, got delta={} gamma={}",
                self.delta, self.gamma
            )));
        }
        Ok(())
    }

    /// The banded operator `A = δI + (γ/h²) L`, with `L` the grid-graph
    /// Laplacian (missing neighbours on the boundary give the zero-flux closure).
    pub fn operator(&self) -> BandedMatrix {
        let g = self.grid;
        let n = g.n();
        let c = self.gamma / (g.spacing() * g.spacing());
        let mut a = BandedMatrix::zeros(g.len(), n);
        for p in 0..g.len() {
            a.add(p, p, self.delta);
            for nb in g.neighbours(p) {
                a.add(p, p, c);
                a.add(p, nb, -c);
            }
        }
        a
    }
}

/// Draws `m = A⁻¹ ξ`, `ξ ~ N(0, I)` in nodal coordinates, reusing one factorization of `A`.
#[derive(Clone, Debug)]
pub struct PriorSampler {
    factor: BandedLu,
}

impl PriorSampler {
    pub fn new(cfg: &PriorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(PriorSampler { factor: cfg.operator().factorize()? })
    }

    pub fn dim(&self) -> usize {
        self.factor.dim()
    }

    /// Applies `A⁻¹` to a given white-noise vector.
    pub fn transform(&self, xi: &[f64]) -> Vec<f64> {
        self.factor.solve(xi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let xi = rng::normal_vec(rng, self.dim());
        self.transform(&xi)
    }
}

pub fn sample_prior<R: Rng + ?Sized>(cfg: &PriorConfig, rng: &mut R) -> Result<Vec<f64>> {
    Ok(PriorSampler::new(cfg)?.sample(rng))
}
