//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! Values are recorded on a [`Tape`] as operations execute; [`Tape::backward`]
//! replays the record in reverse. [`ParamStore`] and [`Graph`] bind named
//! trainable tensors to a tape, [`Optimizer`] applies SGD or Adam updates,
//! and [`grad_check`] compares tape gradients with central differences.

pub mod checkpoint;
mod error;
pub mod gradcheck;
pub mod ops;
pub mod optim;
pub mod params;
pub mod tape;
mod tensor;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest};
pub use error::{AutodiffError, Result};
pub use gradcheck::{grad_check, grad_check_report, grad_check_store, GradCheckReport};
pub use ops::{forward_op, OpKind};
pub use optim::{clip_grad_norm, Optimizer, OptimizerKind};
pub use params::{Graph, ParamId, ParamStore};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
