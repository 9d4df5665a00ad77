//! Discrete-token decoding: greedy, beam search and exhaustive search.
//!
//! Hypotheses have a fixed length (there is no end token). Scores are summed
//! log-probabilities; ties between equal scores go to the lexicographically
//! smaller token sequence.

use std::cmp::Ordering;

use mctn_autodiff::{Graph, ParamId, ParamStore, Tensor, Var};

use super::layers::{AttentionMemory, Init, Linear};
use super::model::{Decoder, EncodedSequence, Seq2SeqModel};
use crate::error::{MctnError, Result};

/// Token embedding (`vocab x model_dim`) and output map (`hidden -> vocab`).
#[derive(Clone, Debug, PartialEq)]
pub struct TokenHead {
    pub embedding: ParamId,
    pub out: Linear,
    pub vocab: usize,
}

impl TokenHead {
    pub fn new(store: &mut ParamStore, init: &Init, name: &str, vocab: usize, model_dim: usize, hidden_dim: usize) -> Self {
        let embedding = init.glorot(store, &format!("{name}.emb"), vocab, model_dim);
        let out = Linear::new(store, init, &format!("{name}.out"), hidden_dim, vocab);
        TokenHead { embedding, out, vocab }
    }
}

struct TokenDecoder<'a> {
    g: Graph<'a>,
    head: &'a TokenHead,
    dec: &'a Decoder,
    memory: AttentionMemory,
    start: Var,
    model_dim: usize,
}

impl<'a> TokenDecoder<'a> {
    fn new(store: &'a ParamStore, model: &'a Seq2SeqModel, enc: &EncodedSequence) -> Result<Self> {
        let head = model.token_head.as_ref().ok_or(MctnError::MissingComponent("token head"))?;
        let dec = model.decoder()?;
        if enc.source_length == 0 {
            return Err(MctnError::EmptySequence);
        }
        let mut g = Graph::inference(store);
        let states: Vec<Var> = (0..enc.source_length)
            .map(|i| Ok(g.constant(Tensor::matrix(1, enc.states.cols(), enc.states.row(i).to_vec())?)))
            .collect::<Result<_>>()?;
        let memory = dec.attention.memory(&mut g, &states, &[enc.source_length])?;
        let start = *states.last().expect("non-empty");
        Ok(TokenDecoder { g, head, dec, memory, start, model_dim: model.model_dim })
    }

    /// Advances from `state` after emitting `prev`; returns the new state and
    /// log-probabilities of the next token.
    fn step(&mut self, state: Var, prev: Option<usize>) -> Result<(Var, Vec<f64>)> {
        let g = &mut self.g;
        let x = match prev {
            None => g.constant(Tensor::zeros(&[1, self.model_dim])),
            Some(tok) => {
                let mut onehot = Tensor::zeros(&[1, self.head.vocab]);
                onehot.data_mut()[tok] = 1.0;
                let oh = g.constant(onehot);
                let emb = g.p(self.head.embedding);
                g.tape.matmul(oh, emb)?
            }
        };
        let (context, _) = self.dec.attention.attend(g, state, &self.memory)?;
        let inp = g.tape.concat(&[x, context], 1)?;
        let s = self.dec.gru.step(g, state, inp)?;
        let logits = self.head.out.forward(g, s)?;
        let probs = g.tape.softmax(logits)?;
        let logp = g.value(probs).data().iter().map(|p| p.ln()).collect();
        Ok((s, logp))
    }
}

fn better(a: (&[usize], f64), b: (&[usize], f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

/// Argmax token at every step.
pub fn greedy_decode(store: &ParamStore, model: &Seq2SeqModel, enc: &EncodedSequence, max_len: usize) -> Result<Vec<usize>> {
    let mut dec = TokenDecoder::new(store, model, enc)?;
    let mut state = dec.start;
    let mut tokens = Vec::with_capacity(max_len);
    for _ in 0..max_len {
        let (s, logp) = dec.step(state, tokens.last().copied())?;
        state = s;
        tokens.push(crate::metrics::argmax(&logp));
    }
    Ok(tokens)
}

/// Beam search returning the best hypothesis and its score.
pub fn beam_search_scored(
    store: &ParamStore,
    model: &Seq2SeqModel,
    enc: &EncodedSequence,
    beam: usize,
    max_len: usize,
) -> Result<(Vec<usize>, f64)> {
    if beam < 1 {
        return Err(MctnError::Beam("beam width must be at least 1".into()));
    }
    let mut dec = TokenDecoder::new(store, model, enc)?;
    let mut hyps: Vec<(Vec<usize>, f64, Var)> = vec![(Vec::new(), 0.0, dec.start)];
    for _ in 0..max_len {
        let mut cands = Vec::with_capacity(hyps.len() * dec.head.vocab);
        for (tokens, score, state) in &hyps {
            let (s, logp) = dec.step(*state, tokens.last().copied())?;
            for (v, lp) in logp.iter().enumerate() {
                let mut t = tokens.clone();
                t.push(v);
                cands.push((t, score + lp, s));
            }
        }
        cands.sort_by(|a, b| better((&a.0, a.1), (&b.0, b.1)));
        cands.truncate(beam);
        hyps = cands;
    }
    let (tokens, score, _) = hyps.swap_remove(0);
    Ok((tokens, score))
}

pub fn beam_search(
    store: &ParamStore,
    model: &Seq2SeqModel,
    enc: &EncodedSequence,
    beam: usize,
    max_len: usize,
) -> Result<Vec<usize>> {
    Ok(beam_search_scored(store, model, enc, beam, max_len)?.0)
}

/// Summed log-probability of a fixed token sequence.
pub fn sequence_log_prob(store: &ParamStore, model: &Seq2SeqModel, enc: &EncodedSequence, tokens: &[usize]) -> Result<f64> {
    let mut dec = TokenDecoder::new(store, model, enc)?;
    let mut state = dec.start;
    let mut score = 0.0;
    let mut prev = None;
    for &tok in tokens {
        if tok >= dec.head.vocab {
            return Err(MctnError::Beam(format!("token {tok} outside vocabulary of {}", dec.head.vocab)));
        }
        let (s, logp) = dec.step(state, prev)?;
        score += logp[tok];
        state = s;
        prev = Some(tok);
    }
    Ok(score)
}

/// Scores all `vocab^len` sequences and returns the best.
pub fn exhaustive_search(store: &ParamStore, model: &Seq2SeqModel, enc: &EncodedSequence, len: usize) -> Result<(Vec<usize>, f64)> {
    let vocab = model.token_head.as_ref().ok_or(MctnError::MissingComponent("token head"))?.vocab;
    let total = vocab.checked_pow(len as u32).ok_or_else(|| MctnError::Beam("search space too large".into()))?;
    let mut best: Option<(Vec<usize>, f64)> = None;
    for code in 0..total {
        let mut tokens = vec![0; len];
        let mut c = code;
        for slot in tokens.iter_mut().rev() {
            *slot = c % vocab;
            c /= vocab;
        }
        let score = sequence_log_prob(store, model, enc, &tokens)?;
        let replace = match &best {
            None => true,
            Some((bt, bs)) => better((&tokens, score), (bt, *bs)) == Ordering::Less,
        };
        if replace {
            best = Some((tokens, score));
        }
    }
    best.ok_or_else(|| MctnError::Beam("empty search space".into()))
}
