use mctn_autodiff::ops::PROB_CLAMP;
use mctn_autodiff::{forward_op, Graph, OpKind, Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::data::{FeatureSequence, Task};
use crate::error::{MctnError, Result};
use crate::models::LossSlot;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_t: f64,
    pub lambda_c: f64,
    pub lambda_t1: f64,
    pub lambda_c1: f64,
    pub lambda_t2: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { lambda_t: 1.0, lambda_c: 1.0, lambda_t1: 1.0, lambda_c1: 1.0, lambda_t2: 1.0 }
    }
}

impl LossWeights {
    pub fn uniform(v: f64) -> Self {
        LossWeights { lambda_t: v, lambda_c: v, lambda_t1: v, lambda_c1: v, lambda_t2: v }
    }

    pub fn weight(&self, slot: LossSlot) -> f64 {
        match slot {
            LossSlot::T => self.lambda_t,
            LossSlot::C => self.lambda_c,
            LossSlot::T1 => self.lambda_t1,
            LossSlot::C1 => self.lambda_c1,
            LossSlot::T2 => self.lambda_t2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda_t, self.lambda_c, self.lambda_t1, self.lambda_c1, self.lambda_t2];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(MctnError::Config(format!("loss weights must be finite and non-negative: {all:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arity {
    Bimodal,
    Trimodal,
}

/// Loss components. Bimodal runs fill `l_t`, `l_c`; trimodal runs fill
/// `l_t1`, `l_c1`, `l_t2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_t: Option<f64>,
    pub l_c: Option<f64>,
    pub l_p: Option<f64>,
    pub l_t1: Option<f64>,
    pub l_c1: Option<f64>,
    pub l_t2: Option<f64>,
    pub total: f64,
}

impl LossBreakdown {
    pub fn slot(&self, slot: LossSlot) -> Option<f64> {
        match slot {
            LossSlot::T => self.l_t,
            LossSlot::C => self.l_c,
            LossSlot::T1 => self.l_t1,
            LossSlot::C1 => self.l_c1,
            LossSlot::T2 => self.l_t2,
        }
    }

    pub fn set_slot(&mut self, slot: LossSlot, v: f64) {
        let field = match slot {
            LossSlot::T => &mut self.l_t,
            LossSlot::C => &mut self.l_c,
            LossSlot::T1 => &mut self.l_t1,
            LossSlot::C1 => &mut self.l_c1,
            LossSlot::T2 => &mut self.l_t2,
        };
        *field = Some(v);
    }
}

/// `λ_t L_t + λ_c L_c + L_p` (bimodal) or
/// `λ_t1 L_t1 + λ_c1 L_c1 + λ_t2 L_t2 + L_p` (trimodal).
pub fn coupled_objective(parts: &LossBreakdown, w: &LossWeights, arity: Arity) -> Result<f64> {
    let need = |v: Option<f64>, name: &'static str| v.ok_or(MctnError::MissingComponent(name));
    let l_p = need(parts.l_p, "l_p")?;
    Ok(match arity {
        Arity::Bimodal => w.lambda_t * need(parts.l_t, "l_t")? + w.lambda_c * need(parts.l_c, "l_c")? + l_p,
        Arity::Trimodal => {
            w.lambda_t1 * need(parts.l_t1, "l_t1")?
                + w.lambda_c1 * need(parts.l_c1, "l_c1")?
                + w.lambda_t2 * need(parts.l_t2, "l_t2")?
                + l_p
        }
    })
}

fn same_shape(a: &FeatureSequence, b: &FeatureSequence) -> Result<()> {
    if a.len() != b.len() {
        return Err(MctnError::Dimension { context: "sequence length".into(), expected: b.len(), actual: a.len() });
    }
    if a.dim() != b.dim() {
        return Err(MctnError::Dimension { context: "feature dim".into(), expected: b.dim(), actual: a.dim() });
    }
    Ok(())
}

/// MSE over the unpadded frames of a translated sequence.
pub fn translation_loss(x_hat: &FeatureSequence, x: &FeatureSequence) -> Result<f64> {
    same_shape(x_hat, x)?;
    let n = x.len() * x.dim();
    let a = Tensor::vector(x_hat.padded_data()[..n].to_vec())?;
    let b = Tensor::vector(x.padded_data()[..n].to_vec())?;
    Ok(forward_op(&OpKind::Mse, &[&a, &b])?.item())
}

/// MSE between a back-translated source and the real source.
pub fn cycle_loss(x_s_hat: &FeatureSequence, x_s: &FeatureSequence) -> Result<f64> {
    translation_loss(x_s_hat, x_s)
}

/// Mean absolute error (regression, one output per sample) or mean negative
/// log-probability of the true class (classification).
pub fn prediction_loss(outputs: &[Vec<f64>], labels: &[f64], task: Task) -> Result<f64> {
    if outputs.is_empty() || outputs.len() != labels.len() {
        return Err(MctnError::Metric(format!("{} outputs for {} labels", outputs.len(), labels.len())));
    }
    let n = outputs.len() as f64;
    match task {
        Task::Regression => {
            let mut sum = 0.0;
            for (o, y) in outputs.iter().zip(labels) {
                if o.len() != 1 {
                    return Err(MctnError::Dimension { context: "regression output".into(), expected: 1, actual: o.len() });
                }
                sum += (o[0] - y).abs();
            }
            Ok(sum / n)
        }
        Task::Classification => {
            let mut sum = 0.0;
            for (p, y) in outputs.iter().zip(labels) {
                let total: f64 = p.iter().sum();
                if (total - 1.0).abs() > 1e-6 || p.iter().any(|v| *v < 0.0) {
                    return Err(MctnError::Metric(format!("probabilities sum to {total}")));
                }
                let class = *y as usize;
                let pc = p.get(class).ok_or_else(|| MctnError::Metric(format!("class {class} outside {} outputs", p.len())))?;
                sum -= pc.max(PROB_CLAMP).ln();
            }
            Ok(sum / n)
        }
    }
}

/// Prediction loss on the tape for a `B x out` prediction.
pub fn prediction_loss_var(g: &mut Graph, prediction: Var, labels: &[f64], task: Task) -> Result<Var> {
    let (rows, cols) = {
        let v = g.value(prediction);
        (v.rows(), v.cols())
    };
    match task {
        Task::Regression => {
            let y = g.constant(Tensor::matrix(rows, 1, labels.to_vec())?);
            Ok(g.tape.mae(prediction, y)?)
        }
        Task::Classification => {
            let mut onehot = Tensor::zeros(&[rows, cols]);
            for (r, &y) in labels.iter().enumerate() {
                let c = y as usize;
                if c >= cols {
                    return Err(MctnError::Metric(format!("class {c} outside {cols} outputs")));
                }
                onehot.data_mut()[r * cols + c] = 1.0;
            }
            let target = g.constant(onehot);
            Ok(g.tape.cross_entropy(prediction, target)?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(rows: &[Vec<f64>], max_len: usize) -> FeatureSequence {
        crate::data::zero_pad(rows, max_len).unwrap()
    }

    #[test]
    fn translation_loss_cases() {
        let a = seq(&[vec![0.0, 0.0]], 1);
        let b = seq(&[vec![1.0, 1.0]], 1);
        assert_eq!(translation_loss(&a, &a).unwrap(), 0.0);
        assert_eq!(translation_loss(&a, &b).unwrap(), 1.0);
        assert_eq!(translation_loss(&seq(&[vec![0.0, 0.0]], 4), &seq(&[vec![1.0, 1.0]], 2)).unwrap(), 1.0);
        assert_eq!(cycle_loss(&b, &a).unwrap(), translation_loss(&a, &b).unwrap());
        assert!(translation_loss(&a, &seq(&[vec![1.0]], 1)).is_err());
    }

    #[test]
    fn prediction_loss_cases() {
        assert_eq!(prediction_loss(&[vec![1.0]], &[1.0], Task::Regression).unwrap(), 0.0);
        assert_eq!(prediction_loss(&[vec![0.5]], &[1.0], Task::Regression).unwrap(), 0.5);
        let ce = prediction_loss(&[vec![0.0, 1.0]], &[1.0], Task::Classification).unwrap();
        assert_eq!(ce, 0.0);
        assert!(prediction_loss(&[vec![0.5, 0.6]], &[1.0], Task::Classification).is_err());
    }

    #[test]
    fn objective_cases() {
        let parts = LossBreakdown { l_t: Some(0.2), l_c: Some(0.3), l_p: Some(0.5), ..Default::default() };
        let w = LossWeights::default();
        assert!((coupled_objective(&parts, &w, Arity::Bimodal).unwrap() - 1.0).abs() < 1e-15);
        let zero = LossWeights { lambda_t: 0.0, lambda_c: 0.0, ..w };
        assert_eq!(coupled_objective(&parts, &zero, Arity::Bimodal).unwrap(), 0.5);
        assert!(matches!(coupled_objective(&parts, &w, Arity::Trimodal), Err(MctnError::MissingComponent("l_t1"))));
        let tri = LossBreakdown { l_t1: Some(0.2), l_c1: Some(0.1), l_t2: Some(9.0), l_p: Some(0.5), ..Default::default() };
        let w2 = LossWeights { lambda_t2: 0.0, ..w };
        assert!((coupled_objective(&tri, &w2, Arity::Trimodal).unwrap() - 0.8).abs() < 1e-15);
    }
}
