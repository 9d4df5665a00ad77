use std::io::Write;

use mctn_autodiff::{clip_grad_norm, AutodiffError, Graph, Optimizer, OptimizerKind, Tensor, Var};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{coupled_objective, prediction_loss, prediction_loss_var, Arity, LossBreakdown, LossWeights};
use crate::data::{Batch, MultimodalDataset, Sample, Split};
use crate::error::{MctnError, Result};
use crate::models::{LossSlot, Mode, ModelBundle};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Non-improving epochs tolerated before stopping; 0 disables early stopping.
    pub patience: usize,
    pub teacher_forcing: bool,
    pub weights: LossWeights,
    pub max_grad_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            seed: 0,
            patience: 10,
            teacher_forcing: true,
            weights: LossWeights::default(),
            max_grad_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(MctnError::Config("epochs and batch size must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(MctnError::Config(format!("learning rate {} must be finite and >= 0", self.learning_rate)));
        }
        if let Some(n) = self.max_grad_norm {
            if !(n.is_finite() && n > 0.0) {
                return Err(MctnError::Config(format!("max_grad_norm {n} must be positive")));
            }
        }
        self.weights.validate()
    }
}

/// One line of `epochs.jsonl`. Trimodal runs also carry the per-level terms;
/// there `l_t = l_t1 + l_t2` and `l_c = l_c1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_t: f64,
    pub l_c: f64,
    pub l_p: f64,
    pub total: f64,
    pub val_l_p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_t1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_t2: Option<f64>,
}

impl EpochRecord {
    pub fn breakdown(&self) -> LossBreakdown {
        let tri = self.l_t1.is_some();
        LossBreakdown {
            l_t: (!tri).then_some(self.l_t),
            l_c: (!tri).then_some(self.l_c),
            l_p: Some(self.l_p),
            l_t1: self.l_t1,
            l_c1: self.l_c1,
            l_t2: self.l_t2,
            total: self.total,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub epoch: usize,
    pub batch: usize,
    pub size: usize,
    pub losses: LossBreakdown,
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub epochs: Vec<EpochRecord>,
    pub steps: Vec<StepRecord>,
    pub best_epoch: usize,
    pub best_val_l_p: f64,
    pub stopped_early: bool,
}

pub fn arity(bundle: &ModelBundle) -> Arity {
    if bundle.spec.is_trimodal() && !bundle.is_prediction_only() {
        Arity::Trimodal
    } else {
        Arity::Bimodal
    }
}

fn arity_slots(a: Arity) -> &'static [LossSlot] {
    match a {
        Arity::Bimodal => &[LossSlot::T, LossSlot::C],
        Arity::Trimodal => &[LossSlot::T1, LossSlot::C1, LossSlot::T2],
    }
}

fn require_split(ds: &MultimodalDataset, split: Split) -> Result<Vec<&Sample>> {
    let s = ds.split(split);
    if s.is_empty() {
        return Err(MctnError::EmptySplit(format!("{split:?}").to_lowercase()));
    }
    Ok(s)
}

/// Coupled objective for one batch on the tape. Terms with zero weight are
/// not built; their components are reported as 0.
pub fn batch_objective(
    g: &mut Graph,
    bundle: &ModelBundle,
    batch: &Batch,
    weights: &LossWeights,
    teacher_forcing: bool,
) -> Result<(Var, LossBreakdown)> {
    let active = |slot: LossSlot| weights.weight(slot) > 0.0;
    let fwd = bundle.forward(g, batch, Mode::Train { teacher_forcing }, &active)?;
    let l_p = prediction_loss_var(g, fwd.prediction, &batch.labels, bundle.task)?;
    let mut parts = LossBreakdown { l_p: Some(g.value(l_p).item()), ..Default::default() };
    for &slot in arity_slots(arity(bundle)) {
        parts.set_slot(slot, 0.0);
    }
    let mut total = l_p;
    for &(slot, term) in &fwd.terms {
        let v = g.value(term).item();
        parts.set_slot(slot, parts.slot(slot).unwrap_or(0.0) + v);
        let weighted = g.tape.scale(term, weights.weight(slot))?;
        total = g.tape.add(total, weighted)?;
    }
    parts.total = g.value(total).item();
    Ok((total, parts))
}

/// Mean per-sample prediction loss over a split, from the source modality only.
pub fn split_prediction_loss(bundle: &ModelBundle, samples: &[&Sample], batch_size: usize) -> Result<f64> {
    let keys = [bundle.source_key()];
    let mut sum = 0.0;
    for chunk in samples.chunks(batch_size.max(1)) {
        let batch = Batch::from_samples(chunk, &keys)?;
        let (outputs, _) = bundle.infer_batch(&batch)?;
        sum += prediction_loss(&outputs, &batch.labels, bundle.task)? * chunk.len() as f64;
    }
    Ok(sum / samples.len() as f64)
}

/// Epoch means. Translation terms are weighted by valid frames, the
/// prediction loss by samples; the total is the objective of those means.
#[derive(Default)]
struct Accum {
    frames: f64,
    samples: f64,
    parts: [f64; 6],
}

impl Accum {
    fn add(&mut self, b: &LossBreakdown, samples: usize, frames: usize) {
        let (n, f) = (samples as f64, frames as f64);
        let vals = [b.l_t, b.l_c, b.l_p, b.l_t1, b.l_c1, b.l_t2];
        for (i, (acc, v)) in self.parts.iter_mut().zip(vals).enumerate() {
            *acc += if i == 2 { n } else { f } * v.unwrap_or(0.0);
        }
        self.samples += n;
        self.frames += f;
    }

    fn record(&self, epoch: usize, arity: Arity, weights: &LossWeights, val_l_p: f64) -> Result<EpochRecord> {
        let m = |i: usize| self.parts[i] / if i == 2 { self.samples } else { self.frames };
        let mut parts = LossBreakdown { l_p: Some(m(2)), ..Default::default() };
        match arity {
            Arity::Bimodal => {
                parts.l_t = Some(m(0));
                parts.l_c = Some(m(1));
            }
            Arity::Trimodal => {
                parts.l_t1 = Some(m(3));
                parts.l_c1 = Some(m(4));
                parts.l_t2 = Some(m(5));
            }
        }
        let total = coupled_objective(&parts, weights, arity)?;
        Ok(match arity {
            Arity::Bimodal => EpochRecord {
                epoch,
                l_t: m(0),
                l_c: m(1),
                l_p: m(2),
                total,
                val_l_p,
                l_t1: None,
                l_c1: None,
                l_t2: None,
            },
            Arity::Trimodal => EpochRecord {
                epoch,
                l_t: m(3) + m(5),
                l_c: m(4),
                l_p: m(2),
                total,
                val_l_p,
                l_t1: parts.l_t1,
                l_c1: parts.l_c1,
                l_t2: parts.l_t2,
            },
        })
    }
}

/// Mini-batch training of `bundle` on the train split with early stopping on
/// validation prediction loss. The best-validation parameters are restored
/// and rounded to f32 on return.
pub fn fit(bundle: &mut ModelBundle, ds: &MultimodalDataset, cfg: &TrainConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    let mut train = require_split(ds, Split::Train)?;
    let valid = require_split(ds, Split::Valid)?;
    let keys = bundle.train_keys();
    let ar = arity(bundle);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate);

    let mut epochs = Vec::new();
    let mut steps = Vec::new();
    let mut best: Option<(usize, f64, Vec<Tensor>)> = None;
    let mut stale = 0;
    let mut stopped_early = false;

    for epoch in 1..=cfg.epochs {
        train.shuffle(&mut rng);
        let mut acc = Accum::default();
        for (bi, chunk) in train.chunks(cfg.batch_size).enumerate() {
            let batch = Batch::from_samples(chunk, &keys)?;
            let non_finite = |e: MctnError| match e {
                MctnError::Autodiff(AutodiffError::NonFinite { .. }) => MctnError::NonFiniteLoss { epoch, batch: bi },
                other => other,
            };
            let (mut grads, parts) = {
                let mut g = Graph::training(&bundle.store);
                let (total, parts) =
                    batch_objective(&mut g, bundle, &batch, &cfg.weights, cfg.teacher_forcing).map_err(non_finite)?;
                if !parts.total.is_finite() {
                    return Err(MctnError::NonFiniteLoss { epoch, batch: bi });
                }
                (g.backward(total).map_err(|e| non_finite(e.into()))?, parts)
            };
            if let Some(max) = cfg.max_grad_norm {
                clip_grad_norm(&mut grads, max);
            }
            opt.step(bundle.store.tensors_mut(), &grads)?;
            acc.add(&parts, chunk.len(), batch.valid_frames());
            steps.push(StepRecord { epoch, batch: bi, size: chunk.len(), losses: parts });
        }
        let val = split_prediction_loss(bundle, &valid, cfg.batch_size)?;
        if !val.is_finite() {
            return Err(MctnError::NonFiniteLoss { epoch, batch: usize::MAX });
        }
        epochs.push(acc.record(epoch, ar, &cfg.weights, val)?);
        if best.as_ref().is_none_or(|(_, b, _)| val < *b) {
            best = Some((epoch, val, bundle.store.tensors().to_vec()));
            stale = 0;
        } else {
            stale += 1;
            if cfg.patience > 0 && stale >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }

    let (best_epoch, best_val_l_p, params) = best.expect("at least one epoch");
    bundle.store.tensors_mut().clone_from_slice(&params);
    bundle.store.round_to_f32();
    Ok(FitOutcome { epochs, steps, best_epoch, best_val_l_p, stopped_early })
}

/// Writes one JSON object per line.
pub fn write_epochs_jsonl(records: &[EpochRecord], mut out: impl Write) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
