//! Thread-pool execution of per-sample work.

use dino_core::datagen::{assemble, generate_sample, Dataset, GenConfig, GenerationStats, Problem, ProblemConfig};
use dino_core::netop::SampleGrad;
use dino_core::training::Executor;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Runs samples on the current rayon pool. Results come back in index
/// order, so reductions match [`dino_core::training::Sequential`] bit for bit.
#[derive(Clone, Copy, Debug, Default)]
pub struct Parallel;

impl Executor for Parallel {
    fn map(
        &self,
        n: usize,
        f: &(dyn Fn(usize) -> dino_core::Result<SampleGrad> + Sync),
    ) -> Vec<dino_core::Result<SampleGrad>> {
        (0..n).into_par_iter().map(f).collect()
    }
}

/// Runs `op` on a pool of `threads` workers, or on the global pool for `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, op: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(op()),
        Some(0) => Err(Error::Invalid("thread count must be positive".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Invalid(format!("cannot start {n} worker threads: {e}")))?;
            Ok(pool.install(op))
        }
    }
}

/// Parallel counterpart of [`dino_core::datagen::generate_dataset`]; output
/// does not depend on the number of threads.
pub fn generate_dataset(cfg: &ProblemConfig, gen: &GenConfig) -> Result<(Dataset, GenerationStats)> {
    let problem = Problem::new(cfg)?;
    gen.svd_config(problem.parameter_dim(), problem.observation_dim())?;
    let results: Vec<_> = (0..gen.n_samples).into_par_iter().map(|i| generate_sample(&problem, gen, i)).collect();
    // The first failure in sample order, whichever thread hit it first.
    let records = results.into_iter().collect::<dino_core::Result<Vec<_>>>()?;
    Ok(assemble(cfg, gen, &problem, records)?)
}
