//! Multimodal cyclic translation networks.
//!
//! A source modality is translated into one or two target modalities by
//! attention-based GRU sequence-to-sequence models; the encoder states of the
//! forward translation form a joint representation that feeds a recurrent
//! prediction head. Training minimises a weighted sum of translation, cycle
//! reconstruction and prediction losses, and inference reads the source
//! modality only.

pub mod data;
mod error;
pub mod metrics;
pub mod models;
pub mod seq2seq;
pub mod train;

pub use error::{MctnError, Result};
