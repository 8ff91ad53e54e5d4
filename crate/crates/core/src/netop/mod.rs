//! Neural operators: a dense latent network, used directly or between
//! frozen reduced bases, with exact Jacobians and double-backpropagated
//! weight gradients of Jacobian-matching losses.

mod mlp;
mod model;
mod penalty;

pub use mlp::{forward_tape, mlp_forward, mlp_jacobian, Activation, MlpSpec, NetworkWeights, Tape};
pub use model::{ModelKind, OperatorModel};
pub use penalty::{penalty_value, sample_objective_grad, JacobianPenalty, SampleGrad, SampleObjective, ValueTarget};
