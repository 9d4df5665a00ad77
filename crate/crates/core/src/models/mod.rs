//! Translator topologies, the prediction head and model bundles.

mod bundle;
mod eager;
mod head;
mod variant;

pub use bundle::{
    masked_mse, Forward, LossPlan, LossSlot, LossTerm, Mode, ModelBundle, ModelConfig, PairedDecoder, Topology,
    CHECKPOINT_STEM, HIDDEN_KEY,
};
pub use eager::{cyclic_translate, hierarchical_forward, joint_representation, CyclicOutput, HierarchicalOutput};
pub use head::{JointRepresentation, PredictionHead, Provenance};
pub use variant::{modality_symbol, ConcatForm, Roles, VariantId, VariantSpec};
