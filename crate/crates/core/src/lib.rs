//! Numerical core for derivative-informed neural operator training.
//!
//! The crate is `no_std` (it needs `alloc`) and contains no IO. It covers:
//!
//! * [`linalg`]: dense kernels, randomized SVD of matrix-free operators,
//!   symmetric eigendecomposition and banded factorizations.
//! * [`models`]: a finite-difference nonlinear reaction–diffusion map with
//!   adjoint Jacobians, an analytic toy map and a Matérn-type prior sampler.
//! * [`datagen`]: sampling of `(m, q(m), ∇q(m))` training tuples with the
//!   Jacobian stored as a truncated SVD.
//! * [`bases`]: derivative-informed and PCA reduced bases.
//! * [`netop`]: reduced-basis and generic neural operators with exact
//!   parametric Jacobians and double-backpropagated loss gradients.
//! * [`training`]: loss formulations, matrix subsampling, Adam and the
//!   mini-batch loop.
//! * [`metrics`]: function, Jacobian, misfit-gradient and Gauss–Newton
//!   accuracies.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bases;
pub mod datagen;
mod error;
pub mod linalg;
pub mod math;
pub mod metrics;
pub mod models;
pub mod netop;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
pub use linalg::{LinearOperator, Matrix, TruncatedJacobian};
