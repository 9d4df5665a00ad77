pub mod ablate;
pub mod align;
pub mod eval;
pub mod gradcheck;
pub mod synth;
pub mod train;
