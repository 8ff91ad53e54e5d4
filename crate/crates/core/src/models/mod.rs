//! Parametric forward maps `m ↦ q` with Jacobian actions, and the Gaussian prior.

mod grid;
mod prior;
mod rd;
mod toy;

pub use grid::Grid;
pub use prior::{sample_prior, PriorConfig, PriorSampler};
pub use rd::{
    NewtonConfig, ObservationLayout, RdConfig, RdJacobian, RdModel, SourceConfig, StateSolution,
};
pub use toy::{toy_map, ToyConfig, ToyMap};
