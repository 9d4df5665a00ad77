//! Losses, the training loop and split evaluation.

mod eval;
mod fit;
mod loss;

pub use eval::{evaluate, Evaluation, Prediction};
pub use fit::{
    arity, batch_objective, fit, split_prediction_loss, write_epochs_jsonl, EpochRecord, FitOutcome, StepRecord,
    TrainConfig,
};
pub use loss::{
    coupled_objective, cycle_loss, prediction_loss, prediction_loss_var, translation_loss, Arity, LossBreakdown,
    LossWeights,
};
