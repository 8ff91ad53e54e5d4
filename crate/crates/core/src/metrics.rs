//! Accuracy metrics of a trained operator on a held-out dataset.
//!
//! Every metric has the form `1 − sqrt(mean_i e_i)` where `e_i` is a
//! per-sample relative squared error. Samples whose reference quantity is
//! zero are excluded and counted. Accuracies are not clamped and may be
//! negative.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::datagen::Dataset;
use crate::linalg::{LinearOperator, Matrix, TruncatedJacobian};
use crate::netop::OperatorModel;
use crate::{math, rng, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Metric {
    L2,
    H1,
    /// Misfit gradient accuracy.
    Grad,
    /// Gauss–Newton Hessian accuracy.
    Gn,
    /// Gauss–Newton Hessian accuracy restricted to the stored `V_r`.
    Rgn,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::L2, Metric::H1, Metric::Grad, Metric::Gn, Metric::Rgn];

    pub fn name(self) -> &'static str {
        match self {
            Metric::L2 => "l2",
            Metric::H1 => "h1",
            Metric::Grad => "grad",
            Metric::Gn => "gn",
            Metric::Rgn => "rgn",
        }
    }

    pub fn parse(s: &str) -> Result<Metric> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown metric '{s}' (expected l2, h1, grad, gn or rgn)")))
    }

    pub fn needs_jacobians(self) -> bool {
        self != Metric::L2
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalConfig {
    pub metrics: Vec<Metric>,
    /// Noise standard deviation relative to the RMS observable entry.
    pub noise_pct: f64,
    /// Noise draws per test sample for the gradient metric.
    pub n_misfit: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { metrics: Metric::ALL.to_vec(), noise_pct: 0.01, n_misfit: 4, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricResult {
    pub metric: Metric,
    pub accuracy: f64,
    /// Relative squared error of each test sample, NaN where excluded. For
    /// the gradient metric this is the mean over the noise draws.
    pub per_sample: Vec<f64>,
    /// Samples left out because their reference quantity vanished.
    pub excluded: usize,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub config: EvalConfig,
    /// Noise standard deviation used by the gradient metric, if it ran.
    pub noise_std: Option<f64>,
    pub results: Vec<MetricResult>,
}

impl EvalReport {
    pub fn accuracy(&self, metric: Metric) -> Option<f64> {
        self.results.iter().find(|r| r.metric == metric).map(|r| r.accuracy)
    }

    pub fn warnings(&self) -> Vec<String> {
        self.results
            .iter()
            .filter(|r| r.excluded > 0)
            .map(|r| format!("{}: {} sample(s) excluded for a zero reference", r.metric.name(), r.excluded))
            .collect()
    }
}

/// `1 − sqrt(mean)` over the non-NaN entries.
fn accuracy_from(metric: Metric, errors: Vec<f64>) -> Result<MetricResult> {
    let kept: Vec<f64> = errors.iter().copied().filter(|e| !e.is_nan()).collect();
    if kept.is_empty() {
        return Err(Error::invalid(format!("{}: every test sample has a zero reference", metric.name())));
    }
    let mean = kept.iter().sum::<f64>() / kept.len() as f64;
    Ok(MetricResult { metric, accuracy: 1.0 - math::sqrt(mean), excluded: errors.len() - kept.len(), per_sample: errors })
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        f64::NAN
    }
}

fn sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// A model Jacobian, kept in factored form for reduced-basis models.
enum ModelJacobian<'a> {
    Dense(Matrix),
    /// Latent Jacobian `J`, full Jacobian `Φ J Ψᵀ`.
    Reduced { j: Matrix, psi: &'a Matrix, phi: &'a Matrix },
}

impl ModelJacobian<'_> {
    fn of<'a>(model: &'a OperatorModel, m: &[f64]) -> Result<ModelJacobian<'a>> {
        let j = model.parametric_jacobian(m)?;
        Ok(match model.bases() {
            Some(b) => ModelJacobian::Reduced { j, psi: &b.psi, phi: &b.phi },
            None => ModelJacobian::Dense(j),
        })
    }

    /// `∇f V` in output coordinates: `∇f V` or `J Ψᵀ V` (the `Φ` factor is
    /// dropped; it preserves norms and inner products).
    fn times_v(&self, v: &Matrix) -> Matrix {
        match self {
            ModelJacobian::Dense(f) => f.matmul(v),
            ModelJacobian::Reduced { j, psi, .. } => j.matmul(&psi.tr_matmul(v)),
        }
    }

    fn transpose_apply(&self, y: &[f64]) -> Vec<f64> {
        match self {
            ModelJacobian::Dense(f) => f.tr_matvec(y),
            ModelJacobian::Reduced { j, psi, phi } => psi.matvec(&j.tr_matvec(&phi.tr_matvec(y))),
        }
    }

    /// `‖∇f ∇fᵀ‖_F² = ‖∇fᵀ∇f‖_F²`.
    fn gram_norm_sq(&self) -> f64 {
        let f = match self {
            ModelJacobian::Dense(f) => f,
            ModelJacobian::Reduced { j, .. } => j,
        };
        f.matmul_tr(f).frobenius_sq()
    }

    /// `‖∇q − ∇f‖_F²` for `∇q = U Σ Vᵀ`.
    fn h1_error(&self, jac: &TruncatedJacobian) -> f64 {
        match self {
            ModelJacobian::Dense(f) => jac.to_dense().sub(f).frobenius_sq(),
            ModelJacobian::Reduced { j, psi, phi } => {
                // Aligned part ‖Φᵀ∇qΨ − J‖² plus the part of ∇q outside the bases.
                let pu = phi.tr_matmul(&jac.u).scale_columns(&jac.sigma);
                let projected = pu.matmul_tr(&psi.tr_matmul(&jac.v));
                let outside = jac.frobenius_sq() - projected.frobenius_sq();
                projected.sub(j).frobenius_sq() + outside.max(0.0)
            }
        }
    }
}

fn check_test_set(model: &OperatorModel, ds: &Dataset) -> Result<()> {
    if ds.is_empty() {
        return Err(Error::invalid("test set is empty"));
    }
    if ds.d_m() != model.input_dim() || ds.d_q() != model.output_dim() {
        return Err(Error::invalid(format!(
            "model maps {} -> {}, test set has d_M = {}, d_Q = {}",
            model.input_dim(),
            model.output_dim(),
            ds.d_m(),
            ds.d_q()
        )));
    }
    Ok(())
}

fn check_jacobians(ds: &Dataset) -> Result<()> {
    if ds.jac.len() != ds.len() || ds.rank() == 0 {
        return Err(Error::invalid("test set has no Jacobians"));
    }
    Ok(())
}

/// `1 − sqrt(mean ‖q − f‖² / ‖q‖²)`.
pub fn l2_accuracy(model: &OperatorModel, ds: &Dataset) -> Result<MetricResult> {
    check_test_set(model, ds)?;
    let errors = (0..ds.len())
        .map(|i| {
            let q = ds.q.row(i);
            let f = model.forward(ds.m.row(i))?;
            let err: f64 = q.iter().zip(&f).map(|(a, b)| (a - b) * (a - b)).sum();
            Ok(ratio(err, sq(q)))
        })
        .collect::<Result<Vec<_>>>()?;
    accuracy_from(Metric::L2, errors)
}

/// `1 − sqrt(mean ‖∇q − ∇f‖_F² / ‖∇q‖_F²)`, with `∇q` the stored factors.
pub fn h1_seminorm_accuracy(model: &OperatorModel, ds: &Dataset) -> Result<MetricResult> {
    check_test_set(model, ds)?;
    check_jacobians(ds)?;
    let errors = (0..ds.len())
        .map(|i| {
            let jac = &ds.jac[i];
            let f = ModelJacobian::of(model, ds.m.row(i))?;
            Ok(ratio(f.h1_error(jac), jac.frobenius_sq()))
        })
        .collect::<Result<Vec<_>>>()?;
    accuracy_from(Metric::H1, errors)
}

/// `∇qᵀ Γ⁻¹ (q − d)` for a diagonal noise covariance.
pub fn misfit_gradient(jac: &dyn LinearOperator, q_pred: &[f64], d: &[f64], noise_var: &[f64]) -> Result<Vec<f64>> {
    if q_pred.len() != jac.nrows() || d.len() != jac.nrows() || noise_var.len() != jac.nrows() {
        return Err(Error::invalid("misfit vectors do not match the Jacobian's row count"));
    }
    if let Some(v) = noise_var.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::invalid(format!("noise variances must be positive, got {v}")));
    }
    let weighted: Vec<f64> = q_pred.iter().zip(d).zip(noise_var).map(|((q, d), v)| (q - d) / v).collect();
    Ok(jac.apply_transpose(&weighted))
}

/// `noise_pct · sqrt(mean ‖q_i‖² / d_Q)`.
pub fn noise_std(ds: &Dataset, noise_pct: f64) -> f64 {
    let mean = (0..ds.len()).map(|i| sq(ds.q.row(i))).sum::<f64>() / (ds.len() * ds.d_q()) as f64;
    noise_pct * math::sqrt(mean)
}

/// Seed of noise draw `draw` at parameter `m`. It is keyed by the parameter
/// values so the metric does not depend on the order of the test set.
pub fn noise_draw_seed(seed: u64, m: &[f64], draw: usize) -> u64 {
    let key = m.iter().fold(rng::splitmix64(seed), |acc, x| rng::splitmix64(acc ^ x.to_bits()));
    rng::derive_seed(key, draw as u64)
}

/// Misfit gradient accuracy. For each sample, `n_misfit` data vectors
/// `d = q + η` with `η ~ N(0, s²I)` are drawn, and the model gradient
/// `∇fᵀ Γ⁻¹ (f − d)` is compared with the true `∇qᵀ Γ⁻¹ (q − d)`.
pub fn gradient_accuracy(model: &OperatorModel, ds: &Dataset, noise_pct: f64, n_misfit: usize, seed: u64) -> Result<MetricResult> {
    check_test_set(model, ds)?;
    check_jacobians(ds)?;
    if !(noise_pct > 0.0) || n_misfit == 0 {
        return Err(Error::invalid("gradient accuracy needs a positive noise level and at least one draw"));
    }
    let s = noise_std(ds, noise_pct);
    let var = vec![s * s; ds.d_q()];
    let mut all = Vec::with_capacity(ds.len() * n_misfit);
    let mut per_sample = Vec::with_capacity(ds.len());
    for i in 0..ds.len() {
        let m = ds.m.row(i);
        let q = ds.q.row(i);
        let f = model.forward(m)?;
        let fj = ModelJacobian::of(model, m)?;
        let mut errs = Vec::with_capacity(n_misfit);
        for draw in 0..n_misfit {
            let eta = rng::normal_vec(&mut rng::stream(noise_draw_seed(seed, m, draw)), ds.d_q());
            let d: Vec<f64> = q.iter().zip(&eta).map(|(q, e)| q + s * e).collect();
            let g_true = misfit_gradient(&ds.jac[i], q, &d, &var)?;
            let weighted: Vec<f64> = f.iter().zip(&d).zip(&var).map(|((f, d), v)| (f - d) / v).collect();
            let g_pred = fj.transpose_apply(&weighted);
            let err: f64 = g_true.iter().zip(&g_pred).map(|(a, b)| (a - b) * (a - b)).sum();
            errs.push(ratio(err, sq(&g_true)));
        }
        all.extend_from_slice(&errs);
        let kept: Vec<f64> = errs.into_iter().filter(|e| !e.is_nan()).collect();
        per_sample.push(if kept.is_empty() { f64::NAN } else { kept.iter().sum::<f64>() / kept.len() as f64 });
    }
    let overall = accuracy_from(Metric::Grad, all)?;
    let excluded = per_sample.iter().filter(|e| e.is_nan()).count();
    Ok(MetricResult { metric: Metric::Grad, accuracy: overall.accuracy, per_sample, excluded })
}

/// Full and reduced Gauss–Newton Hessian accuracies.
///
/// Full: `‖∇qᵀ∇q − ∇fᵀ∇f‖_F² / ‖∇qᵀ∇q‖_F²`, expanded as
/// `Σσ⁴ − 2‖∇f V Σ‖² + ‖∇f∇fᵀ‖²`. Reduced: `‖Σ² − (∇fV)ᵀ(∇fV)‖² / Σσ⁴`.
pub fn gauss_newton_accuracies(model: &OperatorModel, ds: &Dataset) -> Result<(MetricResult, MetricResult)> {
    check_test_set(model, ds)?;
    check_jacobians(ds)?;
    let mut full = Vec::with_capacity(ds.len());
    let mut reduced = Vec::with_capacity(ds.len());
    for i in 0..ds.len() {
        let jac = &ds.jac[i];
        let fj = ModelJacobian::of(model, ds.m.row(i))?;
        let fv = fj.times_v(&jac.v);
        let sigma4: f64 = jac.sigma.iter().map(|s| s * s * s * s).sum();
        let cross = fv.scale_columns(&jac.sigma).frobenius_sq();
        let err = (sigma4 - 2.0 * cross + fj.gram_norm_sq()).max(0.0);
        full.push(ratio(err, sigma4));
        let sigma2: Vec<f64> = jac.sigma.iter().map(|s| s * s).collect();
        let red = Matrix::diag(&sigma2).sub(&fv.tr_matmul(&fv)).frobenius_sq();
        reduced.push(ratio(red, sigma4));
    }
    Ok((accuracy_from(Metric::Gn, full)?, accuracy_from(Metric::Rgn, reduced)?))
}

/// Runs the metrics listed in `cfg`, in the order given.
pub fn evaluate(model: &OperatorModel, ds: &Dataset, cfg: &EvalConfig) -> Result<EvalReport> {
    check_test_set(model, ds)?;
    if cfg.metrics.iter().any(|m| m.needs_jacobians()) && (ds.jac.len() != ds.len() || ds.rank() == 0) {
        return Err(Error::invalid("the requested metrics need Jacobians, but the test set has none"));
    }
    let mut gn = None;
    let mut results = Vec::with_capacity(cfg.metrics.len());
    let mut noise = None;
    for &metric in &cfg.metrics {
        let r = match metric {
            Metric::L2 => l2_accuracy(model, ds)?,
            Metric::H1 => h1_seminorm_accuracy(model, ds)?,
            Metric::Grad => {
                noise = Some(noise_std(ds, cfg.noise_pct));
                gradient_accuracy(model, ds, cfg.noise_pct, cfg.n_misfit, cfg.seed)?
            }
            Metric::Gn | Metric::Rgn => {
                if gn.is_none() {
                    gn = Some(gauss_newton_accuracies(model, ds)?);
                }
                let (f, r) = gn.as_ref().unwrap();
                if metric == Metric::Gn { f.clone() } else { r.clone() }
            }
        };
        results.push(r);
    }
    Ok(EvalReport { config: cfg.clone(), noise_std: noise, results })
}
