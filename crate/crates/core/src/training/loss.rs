use alloc::borrow::Cow;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::datagen::{Dataset, ReducedDataset};
use crate::linalg::{LinearOperator, Matrix, TruncatedJacobian};
use crate::netop::{sample_objective_grad, JacobianPenalty, OperatorModel, SampleGrad, SampleObjective, ValueTarget};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LossVariant {
    /// `‖q − f‖²`.
    L2,
    /// Adds `‖∇q − ∇f‖_F²`.
    H1Full,
    /// Adds `‖Σ_r − U_rᵀ∇f V_r‖_F²`.
    H1Truncated,
    /// Adds the same on a random `k × k` submatrix.
    H1TruncatedMs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MsMode {
    /// Same index set for rows and columns.
    Dependent,
    Independent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MsRedraw {
    PerBatch,
    PerEpoch,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossConfig {
    pub variant: LossVariant,
    /// Weight of the Jacobian term relative to the value term.
    pub h1_weight: f64,
    /// Subsample size for [`LossVariant::H1TruncatedMs`].
    pub k: usize,
    pub ms_mode: MsMode,
    /// Rescale the subsampled penalty so its expectation equals the full truncated penalty.
    pub ms_rescale: bool,
    pub ms_redraw: MsRedraw,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            variant: LossVariant::L2,
            h1_weight: 1.0,
            k: 1,
            ms_mode: MsMode::Dependent,
            ms_rescale: false,
            ms_redraw: MsRedraw::PerBatch,
        }
    }
}

impl LossConfig {
    pub fn new(variant: LossVariant) -> Self {
        LossConfig { variant, ..Default::default() }
    }

    pub fn ms(k: usize) -> Self {
        LossConfig { variant: LossVariant::H1TruncatedMs, k, ..Default::default() }
    }

    pub fn needs_jacobians(&self) -> bool {
        self.variant != LossVariant::L2
    }

    /// Checks the configuration against the stored Jacobian rank `r`.
    pub fn validate(&self, r: Option<usize>) -> Result<()> {
        if !(self.h1_weight >= 0.0) || !self.h1_weight.is_finite() {
            return Err(Error::invalid("h1_weight must be finite and non-negative"));
        }
        if self.variant == LossVariant::H1TruncatedMs {
            match r {
                Some(r) if self.k >= 1 && self.k <= r => {}
                Some(r) => return Err(Error::invalid(format!("subsample size k = {} must lie in 1..={r}", self.k))),
                None => return Err(Error::invalid("matrix subsampling needs Jacobian data")),
            }
        }
        Ok(())
    }
}

/// Row and column index sets for one subsampled penalty.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MsIndices {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub mode: MsMode,
    /// Rank the indices were drawn from.
    pub r: usize,
}

fn draw_without_replacement<R: Rng + ?Sized>(r: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..r).collect();
    for i in 0..k {
        let j = rng.random_range(i..r);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

/// `k` indices drawn uniformly without replacement from `0..r`, for rows and
/// columns (shared in dependent mode).
pub fn subsample_indices<R: Rng + ?Sized>(r: usize, k: usize, mode: MsMode, rng: &mut R) -> Result<MsIndices> {
    if k == 0 || k > r {
        return Err(Error::invalid(format!("subsample size k = {k} must lie in 1..={r}")));
    }
    let rows = draw_without_replacement(r, k, rng);
    let cols = match mode {
        MsMode::Dependent => rows.clone(),
        MsMode::Independent => draw_without_replacement(r, k, rng),
    };
    Ok(MsIndices { rows, cols, mode, r })
}

impl MsIndices {
    fn check(&self, r: usize) -> Result<()> {
        if self.rows.iter().chain(&self.cols).any(|&i| i >= r) {
            return Err(Error::invalid(format!("subsample index out of range for rank {r}")));
        }
        Ok(())
    }

    /// `Σ_{[k̂],[k̃]}`: `σ_i` where row and column pick the same index, zero elsewhere.
    pub fn target(&self, sigma: &[f64]) -> Matrix {
        Matrix::from_fn(self.rows.len(), self.cols.len(), |a, b| {
            if self.rows[a] == self.cols[b] {
                sigma[self.rows[a]]
            } else {
                0.0
            }
        })
    }

    /// Entry weights making the subsampled penalty unbiased for the full one:
    /// `r²/k²` (independent), `r/k` on and `r(r−1)/(k(k−1))` off the diagonal (dependent).
    pub fn rescale_weights(&self) -> Matrix {
        let (r, k) = (self.r as f64, self.rows.len() as f64);
        match self.mode {
            MsMode::Independent => Matrix::from_fn(self.rows.len(), self.cols.len(), |_, _| r * r / (k * k)),
            MsMode::Dependent => Matrix::from_fn(self.rows.len(), self.cols.len(), |a, b| {
                if a == b {
                    r / k
                } else {
                    r * (r - 1.0) / (k * (k - 1.0))
                }
            }),
        }
    }
}

/// `‖Σ_{[k̂],[k̃]} − U_{[k̂]}ᵀ ∇f V_{[k̃]}‖_F²` for a model Jacobian given as an operator.
pub fn ms_penalty(jac: &TruncatedJacobian, model_jac: &dyn LinearOperator, idx: &MsIndices, rescale: bool) -> Result<f64> {
    idx.check(jac.rank())?;
    if model_jac.nrows() != jac.nrows() || model_jac.ncols() != jac.ncols() {
        return Err(Error::invalid("model Jacobian shape does not match the stored Jacobian"));
    }
    let u = jac.u.select_columns(&idx.rows);
    let cols: Vec<Vec<f64>> = idx.cols.iter().map(|&j| model_jac.apply(&jac.v.column(j))).collect();
    let fv = Matrix::from_columns(jac.nrows(), &cols);
    let err = idx.target(&jac.sigma).sub(&u.tr_matmul(&fv));
    Ok(if rescale {
        let w = idx.rescale_weights();
        err.inner(&Matrix::from_fn(err.rows(), err.cols(), |a, b| err[(a, b)] * w[(a, b)]))
    } else {
        err.frobenius_sq()
    })
}

/// Training samples in one of the layouts the loss understands.
#[derive(Clone, Copy, Debug)]
pub enum TrainingData<'a> {
    /// Full-space samples with truncated-SVD Jacobians.
    Full(&'a Dataset),
    /// Samples projected onto the bases of a reduced-basis model.
    Reduced(&'a ReducedDataset),
    /// Values only, no Jacobians.
    Values { m: &'a Matrix, q: &'a Matrix },
}

impl TrainingData<'_> {
    pub fn len(&self) -> usize {
        match self {
            TrainingData::Full(d) => d.len(),
            TrainingData::Reduced(d) => d.len(),
            TrainingData::Values { m, .. } => m.rows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stored Jacobian rank of sample `i`, if Jacobians are present.
    pub fn rank(&self, i: usize) -> Option<usize> {
        match self {
            TrainingData::Full(d) => Some(d.jac[i].rank()),
            TrainingData::Reduced(d) => Some(d.sigma[i].len()),
            TrainingData::Values { .. } => None,
        }
    }

    /// Smallest stored rank over all samples.
    pub fn min_rank(&self) -> Option<usize> {
        (0..self.len()).map(|i| self.rank(i)).min().flatten()
    }
}

fn diag_target(sigma: &[f64]) -> Matrix {
    Matrix::diag(sigma)
}

/// Assembles the objective of sample `i` for `model` under `cfg`.
pub fn build_objective<'a>(
    model: &OperatorModel,
    data: &TrainingData<'a>,
    i: usize,
    cfg: &LossConfig,
    ms: Option<&MsIndices>,
) -> Result<SampleObjective<'a>> {
    let variant = cfg.variant;
    let needs_ms = || ms.ok_or_else(|| Error::invalid("matrix subsampling indices are missing"));
    let ms_weights = |idx: &MsIndices| if cfg.ms_rescale { Some(idx.rescale_weights()) } else { None };

    match (data, model.bases()) {
        (TrainingData::Reduced(_), None) => {
            Err(Error::invalid("reduced training data needs a reduced-basis model"))
        }
        (TrainingData::Values { m, q }, _) => {
            if variant != LossVariant::L2 {
                return Err(Error::invalid("this loss needs Jacobian data, but the training set has none"));
            }
            let (input, value) = value_terms(model, m.row(i), q.row(i))?;
            Ok(SampleObjective { input, value: Some(value), penalty: None })
        }
        (TrainingData::Full(ds), bases) => {
            let (input, value) = value_terms(model, ds.m.row(i), ds.q.row(i))?;
            let jac = &ds.jac[i];
            let penalty = match (variant, bases) {
                (LossVariant::L2, _) => None,
                (LossVariant::H1Full, None) => Some(JacobianPenalty {
                    left: None,
                    right: None,
                    target: Cow::Owned(jac.to_dense()),
                    weights: None,
                }),
                (LossVariant::H1Full, Some(b)) => Some(JacobianPenalty {
                    left: Some(Cow::Owned(b.phi.transpose())),
                    right: Some(Cow::Owned(b.psi.transpose())),
                    target: Cow::Owned(jac.to_dense()),
                    weights: None,
                }),
                (LossVariant::H1Truncated, bases) => {
                    let (l, r) = project_factors(jac, bases);
                    Some(JacobianPenalty { left: Some(l), right: Some(r), target: Cow::Owned(diag_target(&jac.sigma)), weights: None })
                }
                (LossVariant::H1TruncatedMs, bases) => {
                    let idx = needs_ms()?;
                    idx.check(jac.rank())?;
                    let (l, r) = project_factors(jac, bases);
                    Some(JacobianPenalty {
                        left: Some(Cow::Owned(l.select_columns(&idx.rows))),
                        right: Some(Cow::Owned(r.select_columns(&idx.cols))),
                        target: Cow::Owned(idx.target(&jac.sigma)),
                        weights: ms_weights(idx),
                    })
                }
            };
            Ok(SampleObjective { input, value: Some(value), penalty })
        }
        (TrainingData::Reduced(rd), Some(b)) => {
            if rd.input_rank() != b.input_rank() || rd.output_rank() != b.output_rank() {
                return Err(Error::invalid("reduced data was projected onto bases of a different size"));
            }
            let input = Cow::Borrowed(rd.m_r.row(i));
            let value = ValueTarget { target: Cow::Borrowed(rd.q_hat.row(i)), offset: 0.0 };
            let sigma = &rd.sigma[i];
            let penalty = match variant {
                LossVariant::L2 => None,
                LossVariant::H1Full => Some(JacobianPenalty {
                    left: None,
                    right: None,
                    target: Cow::Borrowed(&rd.jac_r[i]),
                    weights: None,
                }),
                LossVariant::H1Truncated => Some(JacobianPenalty {
                    left: Some(Cow::Borrowed(&rd.phi_t_u[i])),
                    right: Some(Cow::Borrowed(&rd.psi_t_v[i])),
                    target: Cow::Owned(diag_target(sigma)),
                    weights: None,
                }),
                LossVariant::H1TruncatedMs => {
                    let idx = needs_ms()?;
                    idx.check(sigma.len())?;
                    Some(JacobianPenalty {
                        left: Some(Cow::Owned(rd.phi_t_u[i].select_columns(&idx.rows))),
                        right: Some(Cow::Owned(rd.psi_t_v[i].select_columns(&idx.cols))),
                        target: Cow::Owned(idx.target(sigma)),
                        weights: ms_weights(idx),
                    })
                }
            };
            Ok(SampleObjective { input, value: Some(value), penalty })
        }
    }
}

/// Left/right penalty factors in latent coordinates: `(U, V)` or `(ΦᵀU, ΨᵀV)`.
fn project_factors<'a>(
    jac: &'a TruncatedJacobian,
    bases: Option<&crate::bases::ReducedBasisPair>,
) -> (Cow<'a, Matrix>, Cow<'a, Matrix>) {
    match bases {
        None => (Cow::Borrowed(&jac.u), Cow::Borrowed(&jac.v)),
        Some(b) => (Cow::Owned(b.phi.tr_matmul(&jac.u)), Cow::Owned(b.psi.tr_matmul(&jac.v))),
    }
}

/// Latent input and value target for a full-space sample `(m, q)`.
fn value_terms<'a>(model: &OperatorModel, m: &'a [f64], q: &'a [f64]) -> Result<(Cow<'a, [f64]>, ValueTarget<'a>)> {
    if q.len() != model.output_dim() {
        return Err(Error::invalid(format!("observable has length {}, model outputs {}", q.len(), model.output_dim())));
    }
    match model.bases() {
        None => {
            if m.len() != model.input_dim() {
                return Err(Error::invalid(format!("input has length {}, model expects {}", m.len(), model.input_dim())));
            }
            Ok((Cow::Borrowed(m), ValueTarget { target: Cow::Borrowed(q), offset: 0.0 }))
        }
        Some(b) => {
            let z = model.encode(m)?;
            let centred: Vec<f64> = q.iter().zip(&b.b).map(|(x, s)| x - s).collect();
            let t = b.phi.tr_matvec(&centred);
            // ‖q − b − Φt‖² = ‖q − b‖² − ‖t‖² for orthonormal Φ.
            let outside = centred.iter().map(|x| x * x).sum::<f64>() - t.iter().map(|x| x * x).sum::<f64>();
            Ok((Cow::Owned(z), ValueTarget { target: Cow::Owned(t), offset: outside.max(0.0) }))
        }
    }
}

/// Maps per-sample work over a batch. Implementations may run samples in
/// parallel but must return results in index order.
pub trait Executor: Sync {
    fn map(&self, n: usize, f: &(dyn Fn(usize) -> Result<SampleGrad> + Sync)) -> Vec<Result<SampleGrad>>;
}

/// Runs samples one after another on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map(&self, n: usize, f: &(dyn Fn(usize) -> Result<SampleGrad> + Sync)) -> Vec<Result<SampleGrad>> {
        (0..n).map(f).collect()
    }
}

/// Batch-mean loss terms and gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchLoss {
    pub loss: f64,
    pub value: f64,
    pub penalty: f64,
    pub grad: Vec<f64>,
    /// Total multiply-adds spent on Jacobian penalties over the batch.
    pub penalty_flops: u64,
}

/// Mean loss over the samples `batch` and its exact weight gradient. `ms`
/// supplies one index draw per batch entry for the subsampled variant.
pub fn loss_and_grad(
    model: &OperatorModel,
    data: &TrainingData<'_>,
    batch: &[usize],
    cfg: &LossConfig,
    ms: Option<&[MsIndices]>,
    exec: &dyn Executor,
) -> Result<BatchLoss> {
    cfg.validate(if cfg.needs_jacobians() { data.min_rank() } else { None })?;
    if cfg.needs_jacobians() && data.min_rank().is_none() {
        return Err(Error::invalid("this loss needs Jacobian data, but the training set has none"));
    }
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    if let Some(ms) = ms {
        if ms.len() != batch.len() {
            return Err(Error::invalid("one subsample draw is needed per batch entry"));
        }
    }
    let results = exec.map(batch.len(), &|j| {
        let obj = build_objective(model, data, batch[j], cfg, ms.map(|m| &m[j]))?;
        sample_objective_grad(&model.spec, &model.weights, &obj, cfg.h1_weight)
    });
    let mut out = BatchLoss { loss: 0.0, value: 0.0, penalty: 0.0, grad: vec![0.0; model.weights.len()], penalty_flops: 0 };
    for r in results {
        let g = r?;
        out.loss += g.loss;
        out.value += g.value;
        out.penalty += g.penalty;
        out.penalty_flops += g.penalty_flops;
        out.grad.iter_mut().zip(&g.grad).for_each(|(a, b)| *a += b);
    }
    let n = batch.len() as f64;
    out.loss /= n;
    out.value /= n;
    out.penalty /= n;
    out.grad.iter_mut().for_each(|g| *g /= n);
    Ok(out)
}
