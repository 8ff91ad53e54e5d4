//! Loss formulations, matrix subsampling, Adam and the mini-batch loop.

mod adam;
mod diagnostics;
mod loss;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use diagnostics::{jacobian_error_terms, JacobianErrorTerms};
pub use loss::{
    build_objective, loss_and_grad, ms_penalty, subsample_indices, BatchLoss, Executor, LossConfig, LossVariant, MsIndices,
    MsMode, MsRedraw, Sequential, TrainingData,
};
pub use train::{dataset_loss, train, train_model, EpochRecord, Silent, TrainConfig, TrainHistory, TrainObserver};
