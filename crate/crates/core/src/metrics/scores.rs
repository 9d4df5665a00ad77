use serde::{Deserialize, Serialize};

use crate::data::Task;
use crate::error::{MctnError, Result};

/// Binary sentiment class of a real value: positive when `>= 0`.
pub fn sign_class(v: f64) -> usize {
    usize::from(v >= 0.0)
}

fn check_pair(a: usize, b: usize) -> Result<()> {
    if a == 0 || b == 0 {
        return Err(MctnError::Metric("empty input".into()));
    }
    if a != b {
        return Err(MctnError::Metric(format!("length mismatch: {a} vs {b}")));
    }
    Ok(())
}

/// Fraction of items whose sign class agrees.
pub fn binary_accuracy(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred.len(), truth.len())?;
    let hits = pred.iter().zip(truth).filter(|(p, t)| sign_class(**p) == sign_class(**t)).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Binary F1 with class 1 as positive; 0 when precision + recall is 0.
pub fn f1_score(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_pair(pred.len(), truth.len())?;
    if let Some(bad) = pred.iter().chain(truth).find(|&&c| c > 1) {
        return Err(MctnError::Metric(format!("f1 expects binary classes, found {bad}")));
    }
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 1) => fneg += 1,
            _ => {}
        }
    }
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fneg == 0 { 0.0 } else { tp as f64 / (tp + fneg) as f64 };
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

pub fn mae_metric(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred.len(), truth.len())?;
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

/// Sample Pearson correlation; errors when either input is constant.
pub fn pearson_r(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a.len(), b.len())?;
    if a.len() < 2 {
        return Err(MctnError::Metric("correlation needs at least 2 points".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(MctnError::Metric("correlation is undefined for constant input".into()));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Test-set metrics. Classification reports carry no `mae`/`corr`; `corr` is
/// also absent when predictions or labels are constant. `f1` is absent for
/// more than two classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: Task,
    pub n: usize,
    pub acc: f64,
    pub f1: Option<f64>,
    pub mae: Option<f64>,
    pub corr: Option<f64>,
}

impl MetricsReport {
    pub fn regression(pred: &[f64], truth: &[f64]) -> Result<Self> {
        let pc: Vec<usize> = pred.iter().map(|&v| sign_class(v)).collect();
        let tc: Vec<usize> = truth.iter().map(|&v| sign_class(v)).collect();
        Ok(MetricsReport {
            task: Task::Regression,
            n: pred.len(),
            acc: binary_accuracy(pred, truth)?,
            f1: Some(f1_score(&pc, &tc)?),
            mae: Some(mae_metric(pred, truth)?),
            corr: pearson_r(pred, truth).ok(),
        })
    }

    /// From per-sample class probabilities and integer labels.
    pub fn classification(probs: &[Vec<f64>], truth: &[usize]) -> Result<Self> {
        check_pair(probs.len(), truth.len())?;
        let pred: Vec<usize> = probs.iter().map(|p| argmax(p)).collect();
        let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
        let binary = probs.iter().all(|p| p.len() == 2);
        Ok(MetricsReport {
            task: Task::Classification,
            n: probs.len(),
            acc: hits as f64 / probs.len() as f64,
            f1: if binary { Some(f1_score(&pred, truth)?) } else { None },
            mae: None,
            corr: None,
        })
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
