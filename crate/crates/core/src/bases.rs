//! Reduced input/output bases: derivative-informed (from Jacobian Gram
//! estimates) and PCA.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::datagen::Dataset;
use crate::linalg::{symmetric_eig_topk, Matrix};
use crate::{Error, Result};

/// How a basis was computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum BasisKind {
    ActiveSubspace,
    OutputDerivative,
    Pca,
    /// Supplied directly (identity blocks, random bases in tests, ...).
    Custom,
}

/// Orthonormal columns plus the eigenvalues they were selected by.
#[derive(Clone, Debug, PartialEq)]
pub struct Basis {
    pub vectors: Matrix,
    pub eigenvalues: Vec<f64>,
    pub kind: BasisKind,
}

/// Frozen bases of a reduced-basis operator `f(m) = Φ φ(Ψᵀm) + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedBasisPair {
    /// `d_M × r̄_M`.
    pub psi: Matrix,
    /// `d_Q × r̄_Q`.
    pub phi: Matrix,
    /// Length `d_Q`.
    pub b: Vec<f64>,
    pub input_kind: BasisKind,
    pub output_kind: BasisKind,
}

impl ReducedBasisPair {
    /// Validates shapes and orthonormality (to 1e-10).
    pub fn new(psi: Matrix, phi: Matrix, b: Vec<f64>, input_kind: BasisKind, output_kind: BasisKind) -> Result<Self> {
        if b.len() != phi.rows() {
            return Err(Error::invalid(format!("shift has length {}, Phi has {} rows", b.len(), phi.rows())));
        }
        if psi.cols() > psi.rows() || phi.cols() > phi.rows() || psi.cols() == 0 || phi.cols() == 0 {
            return Err(Error::invalid("basis ranks must lie between 1 and the ambient dimension"));
        }
        if psi.orthonormality_defect() > 1e-10 || phi.orthonormality_defect() > 1e-10 {
            return Err(Error::invalid("basis columns are not orthonormal"));
        }
        Ok(ReducedBasisPair { psi, phi, b, input_kind, output_kind })
    }

    /// Active subspace for inputs, derivative-informed output basis, `b` the mean of `q`.
    pub fn derivative_informed(ds: &Dataset, input_rank: usize, output_rank: usize) -> Result<Self> {
        let psi = active_subspace(ds, input_rank)?;
        let phi = derivative_output_basis(ds, output_rank)?;
        Self::new(psi.vectors, phi.vectors, column_mean(&ds.q), psi.kind, phi.kind)
    }

    /// PCA of the parameter and observable samples.
    pub fn pca(ds: &Dataset, input_rank: usize, output_rank: usize) -> Result<Self> {
        let (psi, _) = pca_basis(&ds.m, input_rank)?;
        let (phi, mean) = pca_basis(&ds.q, output_rank)?;
        Self::new(psi.vectors, phi.vectors, mean, BasisKind::Pca, BasisKind::Pca)
    }

    pub fn input_rank(&self) -> usize {
        self.psi.cols()
    }

    pub fn output_rank(&self) -> usize {
        self.phi.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.psi.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.phi.rows()
    }
}

/// Top `rank` eigenvectors of `(1/N) Σ V_i Σ_i² V_iᵀ ≈ E[∇qᵀ∇q]`.
pub fn active_subspace(ds: &Dataset, rank: usize) -> Result<Basis> {
    let d = ds.d_m();
    if rank == 0 || rank > d {
        return Err(Error::invalid(format!("input rank {rank} must lie in 1..={d}")));
    }
    let gram = factor_gram(d, ds.jac.iter().map(|j| (&j.v, &j.sigma)))?;
    eigenbasis(&gram, rank, BasisKind::ActiveSubspace)
}

/// Top `rank` eigenvectors of `(1/N) Σ U_i Σ_i² U_iᵀ ≈ E[∇q∇qᵀ]`.
pub fn derivative_output_basis(ds: &Dataset, rank: usize) -> Result<Basis> {
    let d = ds.d_q();
    if rank == 0 || rank > d {
        return Err(Error::invalid(format!("output rank {rank} must lie in 1..={d}")));
    }
    let gram = factor_gram(d, ds.jac.iter().map(|j| (&j.u, &j.sigma)))?;
    eigenbasis(&gram, rank, BasisKind::OutputDerivative)
}

fn factor_gram<'a>(d: usize, factors: impl Iterator<Item = (&'a Matrix, &'a Vec<f64>)>) -> Result<Matrix> {
    let mut gram = Matrix::zeros(d, d);
    let mut n = 0usize;
    for (w, sigma) in factors {
        let ws = w.scale_columns(sigma);
        gram = gram.add(&ws.matmul_tr(&ws));
        n += 1;
    }
    if n == 0 {
        return Err(Error::invalid("dataset is empty"));
    }
    Ok(gram.scaled(1.0 / n as f64))
}

fn eigenbasis(gram: &Matrix, rank: usize, kind: BasisKind) -> Result<Basis> {
    let (eigenvalues, vectors) = symmetric_eig_topk(gram, rank)?;
    Ok(Basis { vectors, eigenvalues, kind })
}

fn column_mean(samples: &Matrix) -> Vec<f64> {
    let mut mean = vec![0.0; samples.cols()];
    for i in 0..samples.rows() {
        mean.iter_mut().zip(samples.row(i)).for_each(|(m, x)| *m += x);
    }
    let n = samples.rows().max(1) as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// Leading eigenvectors of the sample covariance of the rows of `samples`,
/// and the sample mean.
pub fn pca_basis(samples: &Matrix, rank: usize) -> Result<(Basis, Vec<f64>)> {
    let (n, d) = samples.shape();
    if n < 2 {
        return Err(Error::invalid("PCA needs at least two samples"));
    }
    if rank == 0 || rank > (n - 1).min(d) {
        return Err(Error::invalid(format!("PCA rank {rank} must lie in 1..={}", (n - 1).min(d))));
    }
    let mean = column_mean(samples);
    let centred = Matrix::from_fn(n, d, |i, j| samples[(i, j)] - mean[j]);
    let cov = centred.tr_matmul(&centred).scaled(1.0 / (n - 1) as f64);
    Ok((eigenbasis(&cov, rank, BasisKind::Pca)?, mean))
}
