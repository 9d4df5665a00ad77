//! Single-sequence compositions of encoders and decoders.

use mctn_autodiff::ParamStore;

use super::bundle::HIDDEN_KEY;
use super::head::{JointRepresentation, Provenance};
use crate::data::FeatureSequence;
use crate::error::{MctnError, Result};
use crate::seq2seq::{EncodedSequence, Seq2SeqModel};

#[derive(Clone, Debug, PartialEq)]
pub struct CyclicOutput {
    pub forward: JointRepresentation,
    pub x_t_hat: FeatureSequence,
    pub x_s_hat: FeatureSequence,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HierarchicalOutput {
    pub e2: JointRepresentation,
    pub x_t1_hat: FeatureSequence,
    pub x_s_hat: FeatureSequence,
    pub x_t2_hat: FeatureSequence,
}

/// Forward encoder output tagged as a bimodal joint representation.
pub fn joint_representation(enc: &EncodedSequence) -> JointRepresentation {
    JointRepresentation { states: enc.states.clone(), provenance: Provenance::Bimodal }
}

fn require(m: &Seq2SeqModel, name: &str) -> Result<()> {
    if m.has_modality(name) {
        Ok(())
    } else {
        Err(MctnError::UnknownModality(name.to_string()))
    }
}

/// `S -> T -> S` with one shared translator. `x_t_hat` is teacher-forced when
/// `teacher` is given; the back-translation always runs free.
pub fn cyclic_translate(
    store: &ParamStore,
    m: &Seq2SeqModel,
    x_s: &FeatureSequence,
    s: &str,
    t: &str,
    teacher: Option<&FeatureSequence>,
) -> Result<CyclicOutput> {
    require(m, s)?;
    require(m, t)?;
    let len = x_s.len();
    let enc = m.encode_sequence(store, x_s, s)?;
    let x_t_hat = m.decode_sequence(store, &enc, len, t, teacher)?;
    let back = m.encode_sequence(store, &x_t_hat, t)?;
    let x_s_hat = m.decode_sequence(store, &back, len, s, None)?;
    Ok(CyclicOutput { forward: joint_representation(&enc), x_t_hat, x_s_hat })
}

/// Level-1 cycle `S ⇄ T1`, then level 2 encodes the level-1 states and decodes
/// `T2`. Everything runs free.
pub fn hierarchical_forward(
    store: &ParamStore,
    m1: &Seq2SeqModel,
    m2: &Seq2SeqModel,
    x_s: &FeatureSequence,
    s: &str,
    t1: &str,
    t2: &str,
) -> Result<HierarchicalOutput> {
    let level1 = cyclic_translate(store, m1, x_s, s, t1, None)?;
    let expected = m2.input(HIDDEN_KEY)?.in_dim;
    if expected != m1.hidden_dim {
        return Err(MctnError::Dimension { context: "level-2 input".into(), expected, actual: m1.hidden_dim });
    }
    let e1 = FeatureSequence::from_frames(&level1.forward.rows())?;
    let enc2 = m2.encode_sequence(store, &e1, HIDDEN_KEY)?;
    let x_t2_hat = m2.decode_sequence(store, &enc2, x_s.len(), t2, None)?;
    Ok(HierarchicalOutput {
        e2: JointRepresentation { states: enc2.states, provenance: Provenance::Trimodal },
        x_t1_hat: level1.x_t_hat,
        x_s_hat: level1.x_s_hat,
        x_t2_hat,
    })
}
