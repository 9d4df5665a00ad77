use std::collections::BTreeMap;

use mctn_autodiff::{Graph, ParamStore, Tensor, Var};

use super::beam::TokenHead;
use super::layers::{Attention, Gru, Init, Linear};
use crate::data::{Batch, FeatureSequence};
use crate::error::{MctnError, Result};

/// Per-step encoder states of a batch. Rows past their length hold their
/// last valid state, so the final step is every row's final state.
#[derive(Clone, Debug)]
pub struct EncodedBatch {
    pub states: Vec<Var>,
    pub lengths: Vec<usize>,
}

impl EncodedBatch {
    pub fn final_state(&self) -> Var {
        *self.states.last().expect("encoded batches are non-empty")
    }
}

/// Encoder states of one sequence, `L x h`.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedSequence {
    pub states: Tensor,
    pub source_length: usize,
}

impl EncodedSequence {
    fn to_batch(&self, g: &mut Graph) -> Result<EncodedBatch> {
        if self.source_length == 0 {
            return Err(MctnError::EmptySequence);
        }
        let states = (0..self.source_length)
            .map(|i| Tensor::matrix(1, self.states.cols(), self.states.row(i).to_vec()).map(|t| g.constant(t)))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(EncodedBatch { states, lengths: vec![self.source_length] })
    }
}

/// Attention decoder with one output projection per target modality.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoder {
    pub gru: Gru,
    pub attention: Attention,
    pub outputs: BTreeMap<String, Linear>,
}

impl Decoder {
    pub fn new(
        store: &mut ParamStore,
        init: &Init,
        name: &str,
        targets: &[(String, usize)],
        model_dim: usize,
        hidden_dim: usize,
    ) -> Self {
        let gru = Gru::new(store, init, &format!("{name}.gru"), model_dim + hidden_dim, hidden_dim);
        let attention = Attention::new(store, init, &format!("{name}.attn"), hidden_dim, hidden_dim);
        let outputs = targets
            .iter()
            .map(|(m, d)| (m.clone(), Linear::new(store, init, &format!("{name}.out.{m}"), hidden_dim, *d)))
            .collect();
        Decoder { gru, attention, outputs }
    }

    pub fn output(&self, target: &str) -> Result<&Linear> {
        self.outputs.get(target).ok_or_else(|| MctnError::UnknownModality(target.to_string()))
    }

    /// Autoregressive decode of `steps` frames.
    ///
    /// The step-0 input is a zero vector. Later inputs are the projected
    /// teacher frame `t - 1` when `teacher` is given, otherwise the decoder's
    /// own previous output.
    pub fn decode(
        &self,
        g: &mut Graph,
        inputs: &BTreeMap<String, Linear>,
        enc: &EncodedBatch,
        target: &str,
        steps: usize,
        teacher: Option<&[Var]>,
    ) -> Result<Vec<Var>> {
        if steps == 0 {
            return Err(MctnError::EmptySequence);
        }
        let out = self.output(target)?;
        let inp = inputs.get(target).ok_or_else(|| MctnError::UnknownModality(target.to_string()))?;
        if let Some(tf) = teacher {
            if tf.len() != steps {
                return Err(MctnError::TeacherLength { expected: steps, actual: tf.len() });
            }
        }
        let rows = enc.lengths.len();
        let memory = self.attention.memory(g, &enc.states, &enc.lengths)?;
        let mut s = enc.final_state();
        let mut prev = g.constant(Tensor::zeros(&[rows, inp.out_dim]));
        let mut frames = Vec::with_capacity(steps);
        for t in 0..steps {
            let (context, _) = self.attention.attend(g, s, &memory)?;
            let x = g.tape.concat(&[prev, context], 1)?;
            s = self.gru.step(g, s, x)?;
            let y = out.forward(g, s)?;
            frames.push(y);
            if t + 1 < steps {
                let fed = match teacher {
                    Some(tf) => tf[t],
                    None => y,
                };
                prev = inp.forward(g, fed)?;
            }
        }
        Ok(frames)
    }
}

/// GRU encoder/decoder translator with per-modality linear projections into
/// and out of a shared model dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Seq2SeqModel {
    pub name: String,
    pub model_dim: usize,
    pub hidden_dim: usize,
    pub encoder: Gru,
    pub inputs: BTreeMap<String, Linear>,
    pub decoder: Option<Decoder>,
    pub token_head: Option<TokenHead>,
}

impl Seq2SeqModel {
    /// Registers an input and an output projection for every modality.
    pub fn new(
        store: &mut ParamStore,
        init: &Init,
        name: &str,
        modalities: &[(String, usize)],
        model_dim: usize,
        hidden_dim: usize,
    ) -> Self {
        let mut m = Self::encoder_only(store, init, name, modalities, model_dim, hidden_dim);
        m.decoder = Some(Decoder::new(store, init, &format!("{name}.dec"), modalities, model_dim, hidden_dim));
        m
    }

    pub fn encoder_only(
        store: &mut ParamStore,
        init: &Init,
        name: &str,
        modalities: &[(String, usize)],
        model_dim: usize,
        hidden_dim: usize,
    ) -> Self {
        let encoder = Gru::new(store, init, &format!("{name}.enc"), model_dim, hidden_dim);
        let inputs = modalities
            .iter()
            .map(|(m, d)| (m.clone(), Linear::new(store, init, &format!("{name}.in.{m}"), *d, model_dim)))
            .collect();
        Seq2SeqModel {
            name: name.to_string(),
            model_dim,
            hidden_dim,
            encoder,
            inputs,
            decoder: None,
            token_head: None,
        }
    }

    pub fn add_token_head(&mut self, store: &mut ParamStore, init: &Init, vocab: usize) {
        self.token_head = Some(TokenHead::new(store, init, &format!("{}.tok", self.name), vocab, self.model_dim, self.hidden_dim));
    }

    pub fn has_modality(&self, m: &str) -> bool {
        self.inputs.contains_key(m)
    }

    pub fn input(&self, m: &str) -> Result<&Linear> {
        self.inputs.get(m).ok_or_else(|| MctnError::UnknownModality(m.to_string()))
    }

    pub fn decoder(&self) -> Result<&Decoder> {
        self.decoder.as_ref().ok_or(MctnError::MissingComponent("decoder"))
    }

    /// Encodes per-step `B x d` frames of modality `key`.
    pub fn encode(&self, g: &mut Graph, key: &str, frames: &[Var], lengths: &[usize]) -> Result<EncodedBatch> {
        if frames.is_empty() {
            return Err(MctnError::EmptySequence);
        }
        let proj = self.input(key)?;
        let xs = frames.iter().map(|&f| proj.forward(g, f)).collect::<Result<Vec<_>>>()?;
        let states = self.encoder.run(g, &xs, lengths)?;
        Ok(EncodedBatch { states, lengths: lengths.to_vec() })
    }

    pub fn encode_batch(&self, g: &mut Graph, batch: &Batch, key: &str) -> Result<EncodedBatch> {
        let frames = constants(g, batch.feature(key)?);
        self.encode(g, key, &frames, &batch.lengths)
    }

    pub fn decode(
        &self,
        g: &mut Graph,
        enc: &EncodedBatch,
        target: &str,
        steps: usize,
        teacher: Option<&[Var]>,
    ) -> Result<Vec<Var>> {
        self.decoder()?.decode(g, &self.inputs, enc, target, steps, teacher)
    }

    /// Eager encode over the true length of `x`.
    pub fn encode_sequence(&self, store: &ParamStore, x: &FeatureSequence, modality: &str) -> Result<EncodedSequence> {
        let proj = self.input(modality)?;
        if x.dim() != proj.in_dim {
            return Err(MctnError::Dimension { context: format!("modality '{modality}'"), expected: proj.in_dim, actual: x.dim() });
        }
        let batch = Batch::from_sequence(modality, x)?;
        let mut g = Graph::inference(store);
        let enc = self.encode_batch(&mut g, &batch, modality)?;
        Ok(EncodedSequence { states: stack_rows(&g, &enc.states)?, source_length: x.len() })
    }

    /// Eager attention of decoder state `s` over `enc`; returns `(context, weights)`.
    pub fn attend(&self, store: &ParamStore, s: &[f64], enc: &EncodedSequence) -> Result<(Vec<f64>, Vec<f64>)> {
        let attn = &self.decoder()?.attention;
        if s.len() != attn.hidden_dim {
            return Err(MctnError::Dimension { context: "decoder state".into(), expected: attn.hidden_dim, actual: s.len() });
        }
        let mut g = Graph::inference(store);
        let eb = enc.to_batch(&mut g)?;
        let memory = attn.memory(&mut g, &eb.states, &eb.lengths)?;
        let q = g.constant(Tensor::matrix(1, s.len(), s.to_vec())?);
        let (c, w) = attn.attend(&mut g, q, &memory)?;
        Ok((g.value(c).data().to_vec(), g.value(w).data().to_vec()))
    }

    /// Eager decode; teacher-forced when `teacher` is given.
    pub fn decode_sequence(
        &self,
        store: &ParamStore,
        enc: &EncodedSequence,
        target_len: usize,
        target: &str,
        teacher: Option<&FeatureSequence>,
    ) -> Result<FeatureSequence> {
        if let Some(tf) = teacher {
            if tf.len() != target_len {
                return Err(MctnError::TeacherLength { expected: target_len, actual: tf.len() });
            }
        }
        let mut g = Graph::inference(store);
        let eb = enc.to_batch(&mut g)?;
        let tf_vars = match teacher {
            Some(tf) => {
                let batch = Batch::from_sequence(target, tf)?;
                Some(constants(&mut g, batch.feature(target)?))
            }
            None => None,
        };
        let frames = self.decode(&mut g, &eb, target, target_len, tf_vars.as_deref())?;
        let rows: Vec<Vec<f64>> = frames.iter().map(|&f| g.value(f).data().to_vec()).collect();
        FeatureSequence::from_frames(&rows)
    }
}

pub fn constants(g: &mut Graph, tensors: &[Tensor]) -> Vec<Var> {
    tensors.iter().map(|t| g.constant(t.clone())).collect()
}

/// Stacks per-step `1 x h` values into an `L x h` tensor.
pub fn stack_rows(g: &Graph, steps: &[Var]) -> Result<Tensor> {
    let rows: Vec<Vec<f64>> = steps.iter().map(|&v| g.value(v).data().to_vec()).collect();
    Ok(Tensor::from_rows(&rows)?)
}

/// Row `row` of per-step `B x h` values, truncated to `len` steps.
pub fn batch_row(g: &Graph, steps: &[Var], row: usize, len: usize) -> Vec<Vec<f64>> {
    steps[..len].iter().map(|&v| g.value(v).row(row).to_vec()).collect()
}
