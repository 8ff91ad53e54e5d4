//! Training data: parameter draws, observables and truncated-SVD Jacobians,
//! plus their projection onto reduced bases.
//!
//! Sample `i` of a dataset with seed `s` is generated entirely from the
//! stream seeded with `s ^ splitmix64(i)`: the parameter draw comes first,
//! then one `u64` that seeds the randomized SVD. Samples can therefore be
//! produced in any order or in parallel with identical results.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::bases::ReducedBasisPair;
use crate::linalg::{randomized_svd, LinearOperator, Matrix, TruncatedJacobian, DEFAULT_OVERSAMPLE, DEFAULT_POWER_ITERS};
use crate::models::{Grid, PriorConfig, PriorSampler, RdConfig, RdModel, ToyConfig, ToyMap};
use crate::{rng, Error, Result};

/// Which forward map a dataset samples.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum ProblemConfig {
    /// Reaction–diffusion map with the prior `N(0, A⁻²)`, `A = δI − γΔ_h`.
    ReactionDiffusion { rd: RdConfig, prior_delta: f64, prior_gamma: f64 },
    /// Toy map with a standard normal prior.
    Toy(ToyConfig),
}

impl ProblemConfig {
    /// Reaction–diffusion on an `n × n` grid with `δ = 1`, `γ = 0.1`.
    pub fn reaction_diffusion(grid_n: usize) -> Self {
        ProblemConfig::ReactionDiffusion {
            rd: RdConfig { grid_n, ..RdConfig::default() },
            prior_delta: 1.0,
            prior_gamma: 0.1,
        }
    }
}

/// A constructed forward map together with its prior.
#[derive(Clone, Debug)]
pub enum Problem {
    ReactionDiffusion { model: RdModel, prior: PriorSampler },
    Toy(ToyMap),
}

/// Counters for the work done while generating samples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GenerationStats {
    pub samples: usize,
    pub nonlinear_solves: usize,
    pub newton_iterations: usize,
    /// Linearized forward plus adjoint solves (Jacobian actions for the toy map).
    pub linearized_solves: usize,
}

impl GenerationStats {
    pub fn merge(&mut self, other: &GenerationStats) {
        self.samples += other.samples;
        self.nonlinear_solves += other.nonlinear_solves;
        self.newton_iterations += other.newton_iterations;
        self.linearized_solves += other.linearized_solves;
    }
}

/// Randomized SVD settings for the stored Jacobians.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SvdConfig {
    pub rank: usize,
    pub oversample: usize,
    pub power_iters: usize,
}

#[derive(Clone, Debug)]
pub struct SampleRecord {
    pub m: Vec<f64>,
    pub q: Vec<f64>,
    pub jac: TruncatedJacobian,
    pub stats: GenerationStats,
}

struct CountingOperator<'a> {
    inner: &'a Matrix,
    calls: core::cell::Cell<usize>,
}

impl LinearOperator for CountingOperator<'_> {
    fn nrows(&self) -> usize {
        self.inner.rows()
    }
    fn ncols(&self) -> usize {
        self.inner.cols()
    }
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.calls.set(self.calls.get() + 1);
        self.inner.matvec(v)
    }
    fn apply_transpose(&self, w: &[f64]) -> Vec<f64> {
        self.calls.set(self.calls.get() + 1);
        self.inner.tr_matvec(w)
    }
}

impl Problem {
    pub fn new(cfg: &ProblemConfig) -> Result<Self> {
        match cfg {
            ProblemConfig::ReactionDiffusion { rd, prior_delta, prior_gamma } => {
                let model = RdModel::new(rd)?;
                let prior = PriorSampler::new(&PriorConfig {
                    delta: *prior_delta,
                    gamma: *prior_gamma,
                    grid: Grid::new(rd.grid_n)?,
                })?;
                Ok(Problem::ReactionDiffusion { model, prior })
            }
            ProblemConfig::Toy(t) => Ok(Problem::Toy(ToyMap::new(t)?)),
        }
    }

    pub fn parameter_dim(&self) -> usize {
        match self {
            Problem::ReactionDiffusion { model, .. } => model.parameter_dim(),
            Problem::Toy(t) => t.parameter_dim(),
        }
    }

    pub fn observation_dim(&self) -> usize {
        match self {
            Problem::ReactionDiffusion { model, .. } => model.observation_dim(),
            Problem::Toy(t) => t.observation_dim(),
        }
    }

    pub fn sample_parameter<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Problem::ReactionDiffusion { prior, .. } => prior.sample(rng),
            Problem::Toy(t) => rng::normal_vec(rng, t.parameter_dim()),
        }
    }

    /// Observable at `m` without any Jacobian work.
    pub fn forward(&self, m: &[f64]) -> Result<Vec<f64>> {
        match self {
            Problem::ReactionDiffusion { model, .. } => model.forward(m),
            Problem::Toy(t) => Ok(t.forward(m)),
        }
    }

    /// Observable and compressed Jacobian at `m`.
    pub fn evaluate(&self, m: &[f64], svd: &SvdConfig, seed: u64) -> Result<SampleRecord> {
        let mut stats = GenerationStats { samples: 1, nonlinear_solves: 1, ..Default::default() };
        let (q, jac) = match self {
            Problem::ReactionDiffusion { model, .. } => {
                let sol = model.solve_state(m)?;
                stats.newton_iterations = sol.iterations;
                let op = model.jacobian_operator(m, &sol.u)?;
                let jac = randomized_svd(&op, svd.rank, svd.oversample, svd.power_iters, seed)?;
                stats.linearized_solves = op.solve_count();
                (model.observe(&sol.u), jac)
            }
            Problem::Toy(t) => {
                if m.len() != t.parameter_dim() {
                    return Err(Error::invalid("parameter has the wrong length for the toy map"));
                }
                let dense = t.jacobian(m);
                let op = CountingOperator { inner: &dense, calls: core::cell::Cell::new(0) };
                let jac = randomized_svd(&op, svd.rank, svd.oversample, svd.power_iters, seed)?;
                stats.linearized_solves = op.calls.get();
                (t.forward(m), jac)
            }
        };
        Ok(SampleRecord { m: m.to_vec(), q, jac, stats })
    }
}

/// Dataset generation settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenConfig {
    pub n_samples: usize,
    /// Stored Jacobian rank; `None` means `d_Q`.
    pub rank: Option<usize>,
    pub oversample: usize,
    pub power_iters: usize,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_samples: 256,
            rank: None,
            oversample: DEFAULT_OVERSAMPLE,
            power_iters: DEFAULT_POWER_ITERS,
            seed: 0,
        }
    }
}

impl GenConfig {
    /// Effective SVD settings for a problem with the given dimensions.
    pub fn svd_config(&self, d_m: usize, d_q: usize) -> Result<SvdConfig> {
        let rank = self.rank.unwrap_or(d_q);
        if rank == 0 || rank > d_q.min(d_m) {
            return Err(Error::invalid(format!("rank {rank} must lie in 1..={}", d_q.min(d_m))));
        }
        Ok(SvdConfig { rank, oversample: self.oversample, power_iters: self.power_iters })
    }
}

/// Generates sample `index` of the dataset described by `gen`.
pub fn generate_sample(problem: &Problem, gen: &GenConfig, index: usize) -> Result<SampleRecord> {
    let svd = gen.svd_config(problem.parameter_dim(), problem.observation_dim())?;
    let mut r = rng::stream(rng::derive_seed(gen.seed, index as u64));
    let m = problem.sample_parameter(&mut r);
    let svd_seed = r.next_u64();
    problem
        .evaluate(&m, &svd, svd_seed)
        .map_err(|e| Error::Sample { index, source: alloc::boxed::Box::new(e) })
}

/// Everything about a dataset except its arrays.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DatasetMeta {
    pub problem: ProblemConfig,
    pub d_m: usize,
    pub d_q: usize,
    pub rank: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub oversample: usize,
    pub power_iters: usize,
}

/// `N` tuples `(m_i, q_i, U_i Σ_i V_iᵀ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    /// `N × d_M`.
    pub m: Matrix,
    /// `N × d_Q`.
    pub q: Matrix,
    pub jac: Vec<TruncatedJacobian>,
}

impl Dataset {
    /// Assembles a dataset from records ordered by sample index.
    pub fn from_records(meta: DatasetMeta, records: Vec<SampleRecord>) -> Result<Self> {
        let n = records.len();
        let mut m = Matrix::zeros(n, meta.d_m);
        let mut q = Matrix::zeros(n, meta.d_q);
        let mut jac = Vec::with_capacity(n);
        for (i, rec) in records.into_iter().enumerate() {
            if rec.m.len() != meta.d_m || rec.q.len() != meta.d_q {
                return Err(Error::invalid(format!("sample {i} has inconsistent dimensions")));
            }
            m.row_mut(i).copy_from_slice(&rec.m);
            q.row_mut(i).copy_from_slice(&rec.q);
            jac.push(rec.jac);
        }
        let ds = Dataset { meta: DatasetMeta { n_samples: n, ..meta }, m, q, jac };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.m.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn d_m(&self) -> usize {
        self.meta.d_m
    }

    pub fn d_q(&self) -> usize {
        self.meta.d_q
    }

    pub fn rank(&self) -> usize {
        self.meta.rank
    }

    /// Checks the manifest against the arrays and every Jacobian record.
    pub fn validate(&self) -> Result<()> {
        let meta = &self.meta;
        if meta.rank == 0 || meta.rank > meta.d_q || meta.rank > meta.d_m {
            return Err(Error::invalid(format!(
                "rank {} is incompatible with d_Q = {} and d_M = {}",
                meta.rank, meta.d_q, meta.d_m
            )));
        }
        let n = meta.n_samples;
        if self.m.shape() != (n, meta.d_m) || self.q.shape() != (n, meta.d_q) || self.jac.len() != n {
            return Err(Error::invalid("dataset arrays do not match the manifest shapes"));
        }
        for (i, j) in self.jac.iter().enumerate() {
            if j.u.shape() != (meta.d_q, meta.rank) || j.v.shape() != (meta.d_m, meta.rank) || j.rank() != meta.rank {
                return Err(Error::invalid(format!("Jacobian record {i} has the wrong shape")));
            }
            j.validate(1e-8).map_err(|e| Error::Sample { index: i, source: alloc::boxed::Box::new(e) })?;
        }
        Ok(())
    }

    /// The samples at `idx`, in that order, as a new dataset.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let mut m = Matrix::zeros(idx.len(), self.d_m());
        let mut q = Matrix::zeros(idx.len(), self.d_q());
        for (row, &i) in idx.iter().enumerate() {
            m.row_mut(row).copy_from_slice(self.m.row(i));
            q.row_mut(row).copy_from_slice(self.q.row(i));
        }
        Dataset {
            meta: DatasetMeta { n_samples: idx.len(), ..self.meta },
            m,
            q,
            jac: idx.iter().map(|&i| self.jac[i].clone()).collect(),
        }
    }
}

/// Sequential generation of a whole dataset.
pub fn generate_dataset(cfg: &ProblemConfig, gen: &GenConfig) -> Result<(Dataset, GenerationStats)> {
    let problem = Problem::new(cfg)?;
    let records = (0..gen.n_samples)
        .map(|i| generate_sample(&problem, gen, i))
        .collect::<Result<Vec<_>>>()?;
    assemble(cfg, gen, &problem, records)
}

/// Builds the dataset and total counters from records produced by [`generate_sample`].
pub fn assemble(
    cfg: &ProblemConfig,
    gen: &GenConfig,
    problem: &Problem,
    records: Vec<SampleRecord>,
) -> Result<(Dataset, GenerationStats)> {
    let (d_m, d_q) = (problem.parameter_dim(), problem.observation_dim());
    let svd = gen.svd_config(d_m, d_q)?;
    let mut stats = GenerationStats::default();
    for r in &records {
        stats.merge(&r.stats);
    }
    let meta = DatasetMeta {
        problem: *cfg,
        d_m,
        d_q,
        rank: svd.rank,
        n_samples: records.len(),
        seed: gen.seed,
        oversample: gen.oversample,
        power_iters: gen.power_iters,
    };
    Ok((Dataset::from_records(meta, records)?, stats))
}

/// A dataset expressed in the coordinates of a [`ReducedBasisPair`].
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedDataset {
    /// `N × r̄_M`, rows `Ψᵀ m_i`.
    pub m_r: Matrix,
    /// `N × r̄_Q`, rows `Φᵀ(q_i − b)`.
    pub q_hat: Matrix,
    /// `Φᵀ ∇q_i Ψ`, each `r̄_Q × r̄_M`.
    pub jac_r: Vec<Matrix>,
    /// `Φᵀ U_i`, each `r̄_Q × r`.
    pub phi_t_u: Vec<Matrix>,
    /// `Ψᵀ V_i`, each `r̄_M × r`.
    pub psi_t_v: Vec<Matrix>,
    pub sigma: Vec<Vec<f64>>,
}

impl ReducedDataset {
    pub fn len(&self) -> usize {
        self.m_r.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_rank(&self) -> usize {
        self.m_r.cols()
    }

    pub fn output_rank(&self) -> usize {
        self.q_hat.cols()
    }
}

/// Projects `ds` onto `bases`. Reduced Jacobians are built from the stored
/// factors, so they equal `Φᵀ∇qΨ` exactly only when the stored rank captures
/// the whole Jacobian (the `r = d_Q` default).
pub fn reduce_dataset(ds: &Dataset, bases: &ReducedBasisPair) -> Result<ReducedDataset> {
    if bases.psi.rows() != ds.d_m() || bases.phi.rows() != ds.d_q() || bases.b.len() != ds.d_q() {
        return Err(Error::invalid(format!(
            "bases of shape Psi {:?}, Phi {:?} do not fit a dataset with d_M = {}, d_Q = {}",
            bases.psi.shape(),
            bases.phi.shape(),
            ds.d_m(),
            ds.d_q()
        )));
    }
    let m_r = ds.m.matmul(&bases.psi);
    let mut centred = ds.q.clone();
    for i in 0..centred.rows() {
        centred.row_mut(i).iter_mut().zip(&bases.b).for_each(|(x, b)| *x -= b);
    }
    let q_hat = centred.matmul(&bases.phi);
    let mut jac_r = Vec::with_capacity(ds.len());
    let mut phi_t_u = Vec::with_capacity(ds.len());
    let mut psi_t_v = Vec::with_capacity(ds.len());
    for j in &ds.jac {
        let pu = bases.phi.tr_matmul(&j.u);
        let pv = bases.psi.tr_matmul(&j.v);
        jac_r.push(pu.scale_columns(&j.sigma).matmul_tr(&pv));
        phi_t_u.push(pu);
        psi_t_v.push(pv);
    }
    Ok(ReducedDataset { m_r, q_hat, jac_r, phi_t_u, psi_t_v, sigma: ds.jac.iter().map(|j| j.sigma.clone()).collect() })
}
