//! Datasets: on-disk format, alignment, padding, batching and synthetic data.

pub mod align;
pub mod batch;
pub mod dataset;
pub mod sequence;
pub mod synth;

pub use align::{align_by_intervals, Alignment, IntervalTable};
pub use batch::{join_keys, sample_feature, split_key, Batch, CONCAT_SEP};
pub use dataset::{
    load_dataset, load_dataset_with, read_frames_csv, read_modalities, save_dataset, write_frames_csv,
    LoadOptions, ModalityInfo, MultimodalDataset, Sample, Split, Task, MANIFEST_FILE,
};
pub use sequence::{zero_pad, FeatureSequence};
pub use synth::{synth_generate, SynthOutput, SynthSpec, DEFAULT_MODALITY_NAMES};
