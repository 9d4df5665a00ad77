use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mctn_autodiff::checkpoint::{load_checkpoint, save_checkpoint};
use mctn_autodiff::{Graph, ParamStore, Tensor, Var};
use serde::{Deserialize, Serialize};

use super::head::{JointRepresentation, PredictionHead, Provenance};
use super::variant::{Roles, VariantId, VariantSpec};
use crate::data::{split_key, Batch, FeatureSequence, Task};
use crate::error::{MctnError, Result};
use crate::seq2seq::{constants, Decoder, EncodedBatch, Init, Linear, Seq2SeqModel};

/// Input key under which a level-2 translator reads level-1 encoder states.
pub const HIDDEN_KEY: &str = "hidden";

pub const CHECKPOINT_STEM: &str = "checkpoint";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model_dim: usize,
    pub hidden_dim: usize,
    pub head_hidden: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { model_dim: 16, hidden_dim: 16, head_hidden: 16, seed: 0 }
    }
}

/// Which weight a translation-side loss term is multiplied by.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossSlot {
    T,
    C,
    T1,
    C1,
    T2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossTerm {
    pub name: String,
    pub slot: LossSlot,
}

/// Translation-side loss terms of a topology. The prediction loss is always
/// present and is not listed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossPlan {
    pub terms: Vec<LossTerm>,
}

impl LossPlan {
    pub fn prediction_only() -> Self {
        LossPlan { terms: Vec::new() }
    }

    fn with(terms: &[(&str, LossSlot)]) -> Self {
        LossPlan { terms: terms.iter().map(|(n, s)| LossTerm { name: n.to_string(), slot: *s }).collect() }
    }

    pub fn has_slot(&self, slot: LossSlot) -> bool {
        self.terms.iter().any(|t| t.slot == slot)
    }

    pub fn slots(&self) -> Vec<LossSlot> {
        let mut s: Vec<LossSlot> = self.terms.iter().map(|t| t.slot).collect();
        s.sort();
        s.dedup();
        s
    }

    /// Names of the terms, e.g. `["L_t", "L_c", "L_p"]`.
    pub fn term_names(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.name.clone()).chain(std::iter::once("L_p".to_string())).collect()
    }
}

/// Second decoder of the paired variant, with its own attention and projections.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedDecoder {
    pub decoder: Decoder,
    pub inputs: BTreeMap<String, Linear>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mode {
    /// Training pass; forward decodes use teacher forcing when enabled.
    Train { teacher_forcing: bool },
    /// Source-only prediction: no decoding beyond what the representation needs.
    Infer,
}

/// Result of a batch forward pass.
pub struct Forward {
    /// Per-step joint representation, `B x r` each.
    pub representation: Vec<Var>,
    /// `B x 1` regression outputs or `B x K` class probabilities.
    pub prediction: Var,
    /// Evaluated translation terms.
    pub terms: Vec<(LossSlot, Var)>,
}

/// Everything needed to rebuild a bundle from a checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub spec: VariantSpec,
    pub config: ModelConfig,
    pub task: Task,
    pub classes: usize,
    pub dims: BTreeMap<String, usize>,
    pub loss_plan: LossPlan,
    pub prediction_only: bool,
}

/// Translators, prediction head and their shared parameter store.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle {
    pub spec: VariantSpec,
    pub config: ModelConfig,
    pub task: Task,
    pub classes: usize,
    pub dims: BTreeMap<String, usize>,
    pub store: ParamStore,
    pub translators: Vec<Seq2SeqModel>,
    pub paired: Option<PairedDecoder>,
    pub head: PredictionHead,
    pub loss_plan: LossPlan,
    prediction_only: bool,
}

fn key_dim(dims: &BTreeMap<String, usize>, key: &str) -> Result<usize> {
    split_key(key)
        .iter()
        .map(|k| dims.get(*k).copied().ok_or_else(|| MctnError::UnknownModality(k.to_string())))
        .sum()
}

fn concat_steps(g: &mut Graph, a: &[Var], b: &[Var]) -> Result<Vec<Var>> {
    a.iter().zip(b).map(|(&x, &y)| Ok(g.tape.concat(&[x, y], 1)?)).collect()
}

impl ModelBundle {
    /// Builds the translators, head and loss plan for a topology.
    pub fn build(
        spec: &VariantSpec,
        dims: &BTreeMap<String, usize>,
        task: Task,
        classes: usize,
        config: &ModelConfig,
    ) -> Result<Self> {
        spec.validate()?;
        if config.model_dim == 0 || config.hidden_dim == 0 || config.head_hidden == 0 {
            return Err(MctnError::Config("model dimensions must be positive".into()));
        }
        let init = Init::new(config.seed);
        let mut store = ParamStore::new();
        let (md, h) = (config.model_dim, config.hidden_dim);
        let r = &spec.roles;
        let dim_of = |k: &str| key_dim(dims, k).map(|d| (k.to_string(), d));
        let (s, t1) = (dim_of(&r.source)?, dim_of(&r.target1)?);
        let mut paired = None;
        use LossSlot::*;
        let (translators, rep_dim, plan) = match spec.id {
            VariantId::A | VariantId::B | VariantId::C => {
                let m = Seq2SeqModel::new(&mut store, &init, "m1", &[s, t1], md, h);
                let plan = match spec.id {
                    VariantId::A => LossPlan::with(&[("L_t", T), ("L_c", C)]),
                    VariantId::B => LossPlan::with(&[("L_t", T)]),
                    _ => LossPlan::with(&[("L_t(s->t)", T), ("L_t(t->s)", T)]),
                };
                (vec![m], h, plan)
            }
            VariantId::D => {
                let m1 = Seq2SeqModel::new(&mut store, &init, "m1", &[s.clone(), t1.clone()], md, h);
                let m2 = Seq2SeqModel::new(&mut store, &init, "m2", &[s, t1], md, h);
                (vec![m1, m2], 2 * h, LossPlan::with(&[("L_t(s->t)", T), ("L_t(t->s)", T)]))
            }
            VariantId::E | VariantId::F => {
                let t2 = dim_of(r.target2()?)?;
                let m1 = Seq2SeqModel::new(&mut store, &init, "m1", &[s, t1], md, h);
                let m2 = Seq2SeqModel::new(&mut store, &init, "m2", &[(HIDDEN_KEY.into(), h), t2], md, h);
                let plan = if spec.cyclic {
                    LossPlan::with(&[("L_t1", T1), ("L_c1", C1), ("L_t2", T2)])
                } else {
                    LossPlan::with(&[("L_t1", T1), ("L_t2", T2)])
                };
                (vec![m1, m2], h, plan)
            }
            VariantId::G => {
                let t2 = dim_of(r.target2()?)?;
                let m1 = Seq2SeqModel::new(&mut store, &init, "m1", &[s.clone(), t1.clone()], md, h);
                let m2 = Seq2SeqModel::new(&mut store, &init, "m2", &[s, t1], md, h);
                let m3 = Seq2SeqModel::new(&mut store, &init, "m3", &[(HIDDEN_KEY.into(), 2 * h), t2], md, h);
                let plan = LossPlan::with(&[("L_t1(s->t1)", T1), ("L_t1(t1->s)", T1), ("L_t2", T2)]);
                (vec![m1, m2, m3], h, plan)
            }
            VariantId::H => {
                let (src, tgt) = spec.concat_keys()?;
                let m = Seq2SeqModel::new(&mut store, &init, "m1", &[dim_of(&src)?, dim_of(&tgt)?], md, h);
                (vec![m], h, LossPlan::with(&[("L_t1", T1)]))
            }
            VariantId::I => {
                let t2 = dim_of(r.target2()?)?;
                let m = Seq2SeqModel::new(&mut store, &init, "m1", &[s, t1], md, h);
                let decoder = Decoder::new(&mut store, &init, "p2.dec", std::slice::from_ref(&t2), md, h);
                let inputs = [(t2.0.clone(), Linear::new(&mut store, &init, &format!("p2.in.{}", t2.0), t2.1, md))]
                    .into_iter()
                    .collect();
                paired = Some(PairedDecoder { decoder, inputs });
                (vec![m], h, LossPlan::with(&[("L_t1", T1), ("L_t2", T2)]))
            }
        };
        let head = PredictionHead::new(&mut store, &init, rep_dim, config.head_hidden, task, classes);
        store.round_to_f32();
        Ok(ModelBundle {
            spec: spec.clone(),
            config: config.clone(),
            task,
            classes,
            dims: dims.clone(),
            store,
            translators,
            paired,
            head,
            loss_plan: plan,
            prediction_only: false,
        })
    }

    /// Source encoder plus prediction head, without any decoder. Parameters
    /// carry the same names (and hence initial values) as in variant `a`.
    pub fn prediction_only(
        source: &str,
        dims: &BTreeMap<String, usize>,
        task: Task,
        classes: usize,
        config: &ModelConfig,
    ) -> Result<Self> {
        let init = Init::new(config.seed);
        let mut store = ParamStore::new();
        let s = (source.to_string(), key_dim(dims, source)?);
        let m = Seq2SeqModel::encoder_only(&mut store, &init, "m1", &[s], config.model_dim, config.hidden_dim);
        let head = PredictionHead::new(&mut store, &init, config.hidden_dim, config.head_hidden, task, classes);
        store.round_to_f32();
        let other = dims.keys().find(|k| k.as_str() != source).cloned().unwrap_or_else(|| format!("{source}~"));
        let spec = VariantSpec::new(VariantId::B, Roles::bimodal(source, &other))?;
        Ok(ModelBundle {
            spec,
            config: config.clone(),
            task,
            classes,
            dims: dims.clone(),
            store,
            translators: vec![m],
            paired: None,
            head,
            loss_plan: LossPlan::prediction_only(),
            prediction_only: true,
        })
    }

    pub fn is_prediction_only(&self) -> bool {
        self.prediction_only
    }

    /// Number of scalar parameters.
    pub fn num_params(&self) -> usize {
        self.store.num_scalars()
    }

    /// Scalar parameters belonging to translator `index`.
    pub fn translator_params(&self, index: usize) -> usize {
        let prefix = format!("{}.", self.translators[index].name);
        self.store.named().filter(|(n, _)| n.starts_with(&prefix)).map(|(_, t)| t.len()).sum()
    }

    /// Feature key the prediction path reads.
    pub fn source_key(&self) -> String {
        match self.spec.id {
            VariantId::H => self.spec.concat_keys().map(|k| k.0).unwrap_or_default(),
            _ => self.spec.roles.source.clone(),
        }
    }

    /// Modalities read at inference time.
    pub fn inference_modalities(&self) -> Vec<String> {
        split_key(&self.source_key()).into_iter().map(String::from).collect()
    }

    /// Feature keys a training batch must carry.
    pub fn train_keys(&self) -> Vec<String> {
        if self.prediction_only {
            return vec![self.source_key()];
        }
        let r = &self.spec.roles;
        match self.spec.id {
            VariantId::H => {
                let (a, b) = self.spec.concat_keys().expect("validated");
                vec![a, b]
            }
            _ => r.names().into_iter().map(String::from).collect(),
        }
    }

    pub fn topology(&self) -> Topology {
        Topology {
            spec: self.spec.clone(),
            config: self.config.clone(),
            task: self.task,
            classes: self.classes,
            dims: self.dims.clone(),
            loss_plan: self.loss_plan.clone(),
            prediction_only: self.prediction_only,
        }
    }

    pub fn from_topology(t: &Topology) -> Result<Self> {
        let mut b = if t.prediction_only {
            Self::prediction_only(&t.spec.roles.source, &t.dims, t.task, t.classes, &t.config)?
        } else {
            Self::build(&t.spec, &t.dims, t.task, t.classes, &t.config)?
        };
        b.loss_plan = t.loss_plan.clone();
        Ok(b)
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let topo = serde_json::to_value(self.topology())?;
        Ok(save_checkpoint(dir, CHECKPOINT_STEM, &self.store, topo)?)
    }

    /// Loads a bundle from a checkpoint manifest path.
    pub fn load(manifest: &Path) -> Result<Self> {
        let (m, tensors) = load_checkpoint(manifest)?;
        let topo: Topology = serde_json::from_value(m.topology)
            .map_err(|e| MctnError::Topology(format!("unreadable topology: {e}")))?;
        let mut b = Self::from_topology(&topo)?;
        b.store.load_named(tensors)?;
        Ok(b)
    }

    /// Checks that a dataset's modality dims match the ones this bundle was built for.
    pub fn check_dims(&self, dims: &BTreeMap<String, usize>, modalities: &[String]) -> Result<()> {
        for m in modalities {
            let expected = self.dims.get(m).ok_or_else(|| MctnError::Topology(format!("model has no modality '{m}'")))?;
            match dims.get(m) {
                Some(d) if d == expected => {}
                Some(d) => {
                    return Err(MctnError::Topology(format!("modality '{m}': model expects dim {expected}, dataset has {d}")))
                }
                None => return Err(MctnError::Topology(format!("dataset has no modality '{m}'"))),
            }
        }
        Ok(())
    }

    /// Batch forward pass. In training mode only terms whose slot satisfies
    /// `active` are evaluated; decodes that nothing consumes are skipped.
    pub fn forward(&self, g: &mut Graph, batch: &Batch, mode: Mode, active: &dyn Fn(LossSlot) -> bool) -> Result<Forward> {
        let train = matches!(mode, Mode::Train { .. });
        let tf = matches!(mode, Mode::Train { teacher_forcing: true });
        let on = |slot: LossSlot| train && self.loss_plan.has_slot(slot) && active(slot);
        let lengths = &batch.lengths;
        let steps = batch.steps();
        let mut terms = Vec::new();
        let feature = |g: &mut Graph, key: &str| -> Result<Vec<Var>> { Ok(constants(g, batch.feature(key)?)) };
        let r = &self.spec.roles;
        let (s, t1) = (r.source.as_str(), r.target1.as_str());

        let representation = match self.spec.id {
            VariantId::A | VariantId::B | VariantId::E | VariantId::F => {
                let (st, sc) = if self.spec.is_trimodal() { (LossSlot::T1, LossSlot::C1) } else { (LossSlot::T, LossSlot::C) };
                let m = &self.translators[0];
                let xs = feature(g, s)?;
                let enc = m.encode(g, s, &xs, lengths)?;
                if on(st) || on(sc) {
                    let xt = feature(g, t1)?;
                    let teacher = tf.then_some(xt.as_slice());
                    let xt_hat = m.decode(g, &enc, t1, steps, teacher)?;
                    if on(st) {
                        terms.push((st, masked_mse(g, &xt_hat, &xt, lengths)?));
                    }
                    if on(sc) {
                        let back = m.encode(g, t1, &xt_hat, lengths)?;
                        let xs_hat = m.decode(g, &back, s, steps, None)?;
                        terms.push((sc, masked_mse(g, &xs_hat, &xs, lengths)?));
                    }
                }
                if self.spec.is_trimodal() {
                    self.level2(g, batch, &enc.states, 1, tf, on(LossSlot::T2), &mut terms)?
                } else {
                    enc.states
                }
            }
            VariantId::C => {
                let m = &self.translators[0];
                let xs = feature(g, s)?;
                let enc = m.encode(g, s, &xs, lengths)?;
                if on(LossSlot::T) {
                    let xt = feature(g, t1)?;
                    let xt_hat = m.decode(g, &enc, t1, steps, tf.then_some(xt.as_slice()))?;
                    terms.push((LossSlot::T, masked_mse(g, &xt_hat, &xt, lengths)?));
                    let back = m.encode(g, t1, &xt, lengths)?;
                    let xs_hat = m.decode(g, &back, s, steps, tf.then_some(xs.as_slice()))?;
                    terms.push((LossSlot::T, masked_mse(g, &xs_hat, &xs, lengths)?));
                }
                enc.states
            }
            VariantId::D | VariantId::G => {
                let slot = if self.spec.id == VariantId::D { LossSlot::T } else { LossSlot::T1 };
                let (m1, m2) = (&self.translators[0], &self.translators[1]);
                let xs = feature(g, s)?;
                let e1 = m1.encode(g, s, &xs, lengths)?;
                let xt = if train { Some(feature(g, t1)?) } else { None };
                let teacher = if tf { xt.as_deref() } else { None };
                let xt_hat = m1.decode(g, &e1, t1, steps, teacher)?;
                let e2 = m2.encode(g, t1, &xt_hat, lengths)?;
                if on(slot) {
                    let xt = xt.as_ref().expect("training batch");
                    terms.push((slot, masked_mse(g, &xt_hat, xt, lengths)?));
                    let xs_hat = m2.decode(g, &e2, s, steps, tf.then_some(xs.as_slice()))?;
                    terms.push((slot, masked_mse(g, &xs_hat, &xs, lengths)?));
                }
                let joint = concat_steps(g, &e1.states, &e2.states)?;
                if self.spec.id == VariantId::G {
                    self.level2(g, batch, &joint, 2, tf, on(LossSlot::T2), &mut terms)?
                } else {
                    joint
                }
            }
            VariantId::H => {
                let (src, tgt) = self.spec.concat_keys()?;
                let m = &self.translators[0];
                let xs = feature(g, &src)?;
                let enc = m.encode(g, &src, &xs, lengths)?;
                if on(LossSlot::T1) {
                    let xt = feature(g, &tgt)?;
                    let xt_hat = m.decode(g, &enc, &tgt, steps, tf.then_some(xt.as_slice()))?;
                    terms.push((LossSlot::T1, masked_mse(g, &xt_hat, &xt, lengths)?));
                }
                enc.states
            }
            VariantId::I => {
                let m = &self.translators[0];
                let xs = feature(g, s)?;
                let enc = m.encode(g, s, &xs, lengths)?;
                if on(LossSlot::T1) {
                    let xt = feature(g, t1)?;
                    let xt_hat = m.decode(g, &enc, t1, steps, tf.then_some(xt.as_slice()))?;
                    terms.push((LossSlot::T1, masked_mse(g, &xt_hat, &xt, lengths)?));
                }
                if on(LossSlot::T2) {
                    let t2 = r.target2()?;
                    let p = self.paired.as_ref().ok_or(MctnError::MissingComponent("paired decoder"))?;
                    let xt2 = feature(g, t2)?;
                    let x_hat = p.decoder.decode(g, &p.inputs, &enc, t2, steps, tf.then_some(xt2.as_slice()))?;
                    terms.push((LossSlot::T2, masked_mse(g, &x_hat, &xt2, lengths)?));
                }
                enc.states
            }
        };
        let prediction = self.head.forward(g, &representation, lengths)?;
        Ok(Forward { representation, prediction, terms })
    }

    /// Level-2 translator (index `idx`) over level-1 states; returns its states.
    #[allow(clippy::too_many_arguments)]
    fn level2(
        &self,
        g: &mut Graph,
        batch: &Batch,
        level1: &[Var],
        idx: usize,
        tf: bool,
        with_loss: bool,
        terms: &mut Vec<(LossSlot, Var)>,
    ) -> Result<Vec<Var>> {
        let m = &self.translators[idx];
        let enc = m.encode(g, HIDDEN_KEY, level1, &batch.lengths)?;
        if with_loss {
            let t2 = self.spec.roles.target2()?;
            let xt2 = constants(g, batch.feature(t2)?);
            let x_hat = m.decode(g, &enc, t2, batch.steps(), tf.then_some(xt2.as_slice()))?;
            terms.push((LossSlot::T2, masked_mse(g, &x_hat, &xt2, &batch.lengths)?));
        }
        Ok(enc.states)
    }

    fn provenance(&self) -> Provenance {
        match self.spec.id {
            VariantId::A | VariantId::B => Provenance::Bimodal,
            VariantId::E | VariantId::F => Provenance::Trimodal,
            _ => Provenance::Variant,
        }
    }

    /// Source-only batch inference: per-row outputs and joint representations.
    pub fn infer_batch(&self, batch: &Batch) -> Result<(Vec<Vec<f64>>, Vec<JointRepresentation>)> {
        let mut g = Graph::inference(&self.store);
        let out = self.forward(&mut g, batch, Mode::Infer, &|_| false)?;
        let pred = g.value(out.prediction);
        let preds = (0..batch.size()).map(|i| pred.row(i).to_vec()).collect();
        let reps = (0..batch.size())
            .map(|i| {
                let rows = crate::seq2seq::batch_row(&g, &out.representation, i, batch.lengths[i]);
                Ok(JointRepresentation { states: Tensor::from_rows(&rows)?, provenance: self.provenance() })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((preds, reps))
    }

    /// Prediction from the source sequence alone (the concatenated input for
    /// variant `h`).
    pub fn infer(&self, x_s: &FeatureSequence) -> Result<Vec<f64>> {
        let key = self.source_key();
        let batch = Batch::from_sequence(&key, x_s)?;
        Ok(self.infer_batch(&batch)?.0.remove(0))
    }

    /// Joint representation of one source sequence.
    pub fn represent(&self, x_s: &FeatureSequence) -> Result<JointRepresentation> {
        let key = self.source_key();
        let batch = Batch::from_sequence(&key, x_s)?;
        Ok(self.infer_batch(&batch)?.1.remove(0))
    }

    /// Free-running forward translation losses, for each translation whose
    /// target modality is present in `batch`.
    pub fn diagnostic_losses(&self, batch: &Batch) -> Result<Vec<(String, f64)>> {
        let mut g = Graph::inference(&self.store);
        let mut out = Vec::new();
        let lengths = &batch.lengths;
        let steps = batch.steps();
        let r = &self.spec.roles;
        let mut eval = |g: &mut Graph, name: &str, m: &Seq2SeqModel, enc: &EncodedBatch, target: &str| -> Result<()> {
            if !batch.has(target) {
                return Ok(());
            }
            let x_hat = m.decode(g, enc, target, steps, None)?;
            let x = constants(g, batch.feature(target)?);
            let l = masked_mse(g, &x_hat, &x, lengths)?;
            out.push((name.to_string(), g.value(l).item()));
            Ok(())
        };
        if self.prediction_only {
            return Ok(out);
        }
        match self.spec.id {
            VariantId::H => {
                let (src, tgt) = self.spec.concat_keys()?;
                let m = &self.translators[0];
                let enc = m.encode_batch(&mut g, batch, &src)?;
                eval(&mut g, "L_t1", m, &enc, &tgt)?;
            }
            VariantId::D | VariantId::G => {
                let (m1, m2) = (&self.translators[0], &self.translators[1]);
                let e1 = m1.encode_batch(&mut g, batch, &r.source)?;
                eval(&mut g, "L_t(s->t)", m1, &e1, &r.target1)?;
                if self.spec.id == VariantId::G {
                    let xt_hat = m1.decode(&mut g, &e1, &r.target1, steps, None)?;
                    let e2 = m2.encode(&mut g, &r.target1, &xt_hat, lengths)?;
                    let joint = concat_steps(&mut g, &e1.states, &e2.states)?;
                    let m3 = &self.translators[2];
                    let e3 = m3.encode(&mut g, HIDDEN_KEY, &joint, lengths)?;
                    eval(&mut g, "L_t2", m3, &e3, r.target2()?)?;
                }
            }
            _ => {
                let m = &self.translators[0];
                let enc = m.encode_batch(&mut g, batch, &r.source)?;
                let name = if self.spec.is_trimodal() { "L_t1" } else { "L_t" };
                eval(&mut g, name, m, &enc, &r.target1)?;
                if matches!(self.spec.id, VariantId::E | VariantId::F) {
                    let m2 = &self.translators[1];
                    let e2 = m2.encode(&mut g, HIDDEN_KEY, &enc.states, lengths)?;
                    eval(&mut g, "L_t2", m2, &e2, r.target2()?)?;
                }
                if let (VariantId::I, Some(p)) = (self.spec.id, &self.paired) {
                    let t2 = r.target2()?;
                    if batch.has(t2) {
                        let x_hat = p.decoder.decode(&mut g, &p.inputs, &enc, t2, steps, None)?;
                        let x = constants(&mut g, batch.feature(t2)?);
                        let l = masked_mse(&mut g, &x_hat, &x, lengths)?;
                        out.push(("L_t2".into(), g.value(l).item()));
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Mean squared error over the valid frames of per-step `B x d` sequences.
pub fn masked_mse(g: &mut Graph, pred: &[Var], target: &[Var], lengths: &[usize]) -> Result<Var> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(MctnError::Dimension {
            context: "translation loss steps".into(),
            expected: target.len(),
            actual: pred.len(),
        });
    }
    let p = g.tape.concat(pred, 0)?;
    let t = g.tape.concat(target, 0)?;
    let steps = pred.len();
    if lengths.iter().all(|&l| l >= steps) {
        return Ok(g.tape.mse(p, t)?);
    }
    let dim = g.value(p).cols();
    let rows = lengths.len();
    let mut mask = Vec::with_capacity(steps * rows * dim);
    for step in 0..steps {
        for &l in lengths {
            mask.extend(std::iter::repeat_n(if step < l { 1.0 } else { 0.0 }, dim));
        }
    }
    let valid: usize = lengths.iter().map(|&l| l.min(steps)).sum();
    let mask = g.constant(Tensor::matrix(steps * rows, dim, mask)?);
    let pm = g.tape.mul(p, mask)?;
    let tm = g.tape.mul(t, mask)?;
    let mse = g.tape.mse(pm, tm)?;
    Ok(g.tape.scale(mse, (steps * rows) as f64 / valid as f64)?)
}
