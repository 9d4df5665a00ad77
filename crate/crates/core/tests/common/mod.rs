#![allow(dead_code)]

use mctn::data::{synth_generate, zero_pad, MultimodalDataset, SynthSpec};
use mctn::models::{ModelBundle, ModelConfig, Roles, VariantId, VariantSpec};

pub const LANGUAGE: &str = "language";
pub const VISUAL: &str = "visual";
pub const ACOUSTIC: &str = "acoustic";

/// Synthetic dataset whose samples are shortened by 0, 1 or 2 frames in turn,
/// so batches contain padding.
pub fn ragged(n: usize, len: usize, dims: Vec<usize>, seed: u64) -> MultimodalDataset {
    let mut ds = synth_generate(&SynthSpec::new(n, len, dims, 0.3, seed)).unwrap().dataset;
    for (i, s) in ds.samples.iter_mut().enumerate() {
        let keep = len - (i % 3).min(len - 1);
        for seq in s.features.values_mut() {
            let frames = seq.frames();
            *seq = zero_pad(&frames[..keep], seq.max_len()).unwrap();
        }
    }
    ds.validate().unwrap();
    ds
}

pub fn tiny_config(seed: u64) -> ModelConfig {
    ModelConfig { model_dim: 3, hidden_dim: 3, head_hidden: 3, seed }
}

pub fn spec(id: VariantId) -> VariantSpec {
    let roles = if id.is_trimodal() {
        Roles::trimodal(LANGUAGE, VISUAL, ACOUSTIC)
    } else {
        Roles::bimodal(LANGUAGE, VISUAL)
    };
    VariantSpec::new(id, roles).unwrap()
}

pub fn bundle(id: VariantId, ds: &MultimodalDataset, config: &ModelConfig) -> ModelBundle {
    ModelBundle::build(&spec(id), &ds.dims(), ds.task, ds.num_classes(), config).unwrap()
}
