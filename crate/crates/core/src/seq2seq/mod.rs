//! GRU encoder/decoder translators with additive attention.

mod beam;
mod layers;
mod model;

pub use beam::{beam_search, beam_search_scored, exhaustive_search, greedy_decode, sequence_log_prob, TokenHead};
pub use layers::{Attention, AttentionMemory, Gru, Init, Linear, RowMask, PAD_SCORE};
pub use model::{batch_row, constants, stack_rows, Decoder, EncodedBatch, EncodedSequence, Seq2SeqModel};
