use alloc::format;
use alloc::vec::Vec;

use super::mlp::{mlp_forward, mlp_jacobian, MlpSpec, NetworkWeights};
use crate::bases::ReducedBasisPair;
use crate::linalg::Matrix;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum ModelKind {
    /// `f(m) = φ(m)`.
    Generic,
    /// `f(m) = Φ φ(Ψᵀm) + b`.
    ReducedBasis(ReducedBasisPair),
}

/// A latent network, optionally wrapped by frozen reduced bases.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorModel {
    pub kind: ModelKind,
    pub spec: MlpSpec,
    pub weights: NetworkWeights,
}

impl OperatorModel {
    pub fn generic(spec: MlpSpec, weights: NetworkWeights) -> Result<Self> {
        Self::new(ModelKind::Generic, spec, weights)
    }

    pub fn reduced(bases: ReducedBasisPair, spec: MlpSpec, weights: NetworkWeights) -> Result<Self> {
        Self::new(ModelKind::ReducedBasis(bases), spec, weights)
    }

    pub fn new(kind: ModelKind, spec: MlpSpec, weights: NetworkWeights) -> Result<Self> {
        if !weights.matches(&spec) {
            return Err(Error::invalid("weights do not match the network layout"));
        }
        if let ModelKind::ReducedBasis(b) = &kind {
            if spec.input_width() != b.input_rank() || spec.output_width() != b.output_rank() {
                return Err(Error::invalid(format!(
                    "latent network maps {} -> {}, bases need {} -> {}",
                    spec.input_width(),
                    spec.output_width(),
                    b.input_rank(),
                    b.output_rank()
                )));
            }
        }
        Ok(OperatorModel { kind, spec, weights })
    }

    pub fn bases(&self) -> Option<&ReducedBasisPair> {
        match &self.kind {
            ModelKind::ReducedBasis(b) => Some(b),
            ModelKind::Generic => None,
        }
    }

    pub fn is_reduced(&self) -> bool {
        self.bases().is_some()
    }

    /// `d_M`.
    pub fn input_dim(&self) -> usize {
        self.bases().map_or(self.spec.input_width(), |b| b.input_dim())
    }

    /// `d_Q`.
    pub fn output_dim(&self) -> usize {
        self.bases().map_or(self.spec.output_width(), |b| b.output_dim())
    }

    fn check_input(&self, m: &[f64]) -> Result<()> {
        if m.len() != self.input_dim() {
            return Err(Error::invalid(format!("input has length {}, model expects {}", m.len(), self.input_dim())));
        }
        Ok(())
    }

    /// Latent input `Ψᵀm` (or `m` itself for generic models).
    pub fn encode(&self, m: &[f64]) -> Result<Vec<f64>> {
        self.check_input(m)?;
        Ok(match self.bases() {
            Some(b) => b.psi.tr_matvec(m),
            None => m.to_vec(),
        })
    }

    /// Full-space output `Φy + b` (or `y`).
    pub fn decode(&self, y: &[f64]) -> Vec<f64> {
        match self.bases() {
            Some(b) => {
                let mut q = b.phi.matvec(y);
                q.iter_mut().zip(&b.b).for_each(|(x, s)| *x += s);
                q
            }
            None => y.to_vec(),
        }
    }

    pub fn latent_forward(&self, z: &[f64]) -> Vec<f64> {
        mlp_forward(&self.spec, &self.weights, z)
    }

    pub fn forward(&self, m: &[f64]) -> Result<Vec<f64>> {
        let z = self.encode(m)?;
        Ok(self.decode(&self.latent_forward(&z)))
    }

    /// Row-wise [`forward`](Self::forward).
    pub fn forward_batch(&self, ms: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(ms.rows(), self.output_dim());
        for i in 0..ms.rows() {
            out.row_mut(i).copy_from_slice(&self.forward(ms.row(i))?);
        }
        Ok(out)
    }

    /// Jacobian of the latent network at `Ψᵀm`: `r̄_Q × r̄_M` for reduced
    /// models, `d_Q × d_M` for generic ones.
    pub fn parametric_jacobian(&self, m: &[f64]) -> Result<Matrix> {
        let z = self.encode(m)?;
        Ok(mlp_jacobian(&self.spec, &self.weights, &z))
    }

    /// `∇f(m)` in full space, `Φ J Ψᵀ` for reduced models.
    pub fn full_jacobian(&self, m: &[f64]) -> Result<Matrix> {
        let j = self.parametric_jacobian(m)?;
        Ok(match self.bases() {
            Some(b) => b.phi.matmul(&j).matmul_tr(&b.psi),
            None => j,
        })
    }
}
