use std::collections::BTreeMap;

use serde::Serialize;

use crate::data::{split_key, Batch, MultimodalDataset, Split, Task};
use crate::error::{MctnError, Result};
use crate::metrics::MetricsReport;
use crate::models::{JointRepresentation, ModelBundle};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Prediction {
    pub id: String,
    pub label: f64,
    pub output: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub split: Split,
    pub report: MetricsReport,
    pub predictions: Vec<Prediction>,
    pub representations: Vec<JointRepresentation>,
    /// Free-running translation losses; `None` when no target modality is loaded.
    pub diagnostics: Option<BTreeMap<String, f64>>,
}

/// Source-only inference over a split, plus diagnostic translation losses
/// for whichever target modalities the dataset carries.
pub fn evaluate(bundle: &ModelBundle, ds: &MultimodalDataset, split: Split, batch_size: usize) -> Result<Evaluation> {
    let samples = ds.split(split);
    if samples.is_empty() {
        return Err(MctnError::EmptySplit(format!("{split:?}").to_lowercase()));
    }
    let source = [bundle.source_key()];
    let mut predictions = Vec::with_capacity(samples.len());
    let mut representations = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(batch_size.max(1)) {
        let batch = Batch::from_samples(chunk, &source)?;
        let (outputs, reps) = bundle.infer_batch(&batch)?;
        for ((s, output), rep) in chunk.iter().zip(outputs).zip(reps) {
            predictions.push(Prediction { id: s.id.clone(), label: s.label, output });
            representations.push(rep);
        }
    }
    let report = match bundle.task {
        Task::Regression => {
            let pred: Vec<f64> = predictions.iter().map(|p| p.output[0]).collect();
            let truth: Vec<f64> = predictions.iter().map(|p| p.label).collect();
            MetricsReport::regression(&pred, &truth)?
        }
        Task::Classification => {
            let probs: Vec<Vec<f64>> = predictions.iter().map(|p| p.output.clone()).collect();
            let truth: Vec<usize> = predictions.iter().map(|p| p.label as usize).collect();
            MetricsReport::classification(&probs, &truth)?
        }
    };

    let available = |key: &str| {
        samples.iter().all(|s| split_key(key).iter().all(|k| s.features.contains_key(*k)))
    };
    let keys: Vec<String> = bundle.train_keys().into_iter().filter(|k| available(k)).collect();
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    if keys.len() > 1 && !bundle.is_prediction_only() {
        for chunk in samples.chunks(batch_size.max(1)) {
            let batch = Batch::from_samples(chunk, &keys)?;
            for (name, v) in bundle.diagnostic_losses(&batch)? {
                *sums.entry(name).or_default() += v * chunk.len() as f64;
            }
        }
    }
    let diagnostics = (!sums.is_empty())
        .then(|| sums.into_iter().map(|(k, v)| (k, v / samples.len() as f64)).collect());
    Ok(Evaluation { split, report, predictions, representations, diagnostics })
}
