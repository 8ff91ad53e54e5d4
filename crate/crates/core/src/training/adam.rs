use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{math, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-7 }
    }
}

/// Optimizer state: step count and first/second moment estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(config: AdamConfig, len: usize) -> Self {
        AdamState { config, step: 0, m: vec![0.0; len], v: vec![0.0; len] }
    }
}

/// One bias-corrected Adam update of `w` with gradient `g`. A non-finite
/// gradient leaves `w` and the state untouched.
pub fn adam_step(state: &mut AdamState, w: &mut [f64], g: &[f64]) -> Result<()> {
    if w.len() != g.len() || w.len() != state.m.len() {
        return Err(Error::invalid(format!(
            "Adam shapes differ: weights {}, gradient {}, state {}",
            w.len(),
            g.len(),
            state.m.len()
        )));
    }
    if let Some(i) = g.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("gradient component {i} is {} at Adam step {}", g[i], state.step + 1)));
    }
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - math::powi(beta1, t);
    let c2 = 1.0 - math::powi(beta2, t);
    for i in 0..w.len() {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g[i] * g[i];
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        w[i] -= lr * m_hat / (math::sqrt(v_hat) + eps);
    }
    Ok(())
}
