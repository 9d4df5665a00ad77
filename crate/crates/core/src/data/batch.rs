use std::collections::BTreeMap;

use mctn_autodiff::Tensor;

use super::dataset::Sample;
use super::sequence::FeatureSequence;
use crate::error::{MctnError, Result};

/// Separator for composite feature keys: `"visual+acoustic"` is the
/// feature-axis concatenation of both modalities.
pub const CONCAT_SEP: char = '+';

pub fn split_key(key: &str) -> Vec<&str> {
    key.split(CONCAT_SEP).collect()
}

pub fn join_keys(parts: &[&str]) -> String {
    parts.join(&CONCAT_SEP.to_string())
}

/// Resolves a possibly composite key to one sequence.
pub fn sample_feature(sample: &Sample, key: &str) -> Result<FeatureSequence> {
    let parts = split_key(key);
    if parts.len() == 1 {
        return sample.feature(key).cloned();
    }
    let seqs = parts.iter().map(|p| sample.feature(p)).collect::<Result<Vec<_>>>()?;
    FeatureSequence::concat_features(&seqs)
}

/// Time-major mini-batch: for each key, one `B x d` tensor per step.
///
/// Steps run to the longest true length in the batch; shorter rows are zero
/// there and masked out by `mask(t)`.
#[derive(Clone, Debug)]
pub struct Batch {
    pub ids: Vec<String>,
    pub labels: Vec<f64>,
    pub lengths: Vec<usize>,
    steps: usize,
    features: BTreeMap<String, Vec<Tensor>>,
}

impl Batch {
    pub fn from_samples(samples: &[&Sample], keys: &[String]) -> Result<Self> {
        if samples.is_empty() {
            return Err(MctnError::EmptySplit("batch".into()));
        }
        let lengths: Vec<usize> = samples.iter().map(|s| s.len()).collect();
        if lengths.contains(&0) {
            return Err(MctnError::EmptySequence);
        }
        let steps = *lengths.iter().max().expect("non-empty");
        let b = samples.len();
        let mut features = BTreeMap::new();
        for key in keys {
            if features.contains_key(key) {
                continue;
            }
            let seqs = samples.iter().map(|s| sample_feature(s, key)).collect::<Result<Vec<_>>>()?;
            let dim = seqs[0].dim();
            let mut per_step = Vec::with_capacity(steps);
            for t in 0..steps {
                let mut data = vec![0.0; b * dim];
                for (row, seq) in seqs.iter().enumerate() {
                    if seq.dim() != dim {
                        return Err(MctnError::Dimension {
                            context: format!("batch feature '{key}'"),
                            expected: dim,
                            actual: seq.dim(),
                        });
                    }
                    if t < seq.len() {
                        data[row * dim..(row + 1) * dim].copy_from_slice(seq.frame(t));
                    }
                }
                per_step.push(Tensor::matrix(b, dim, data)?);
            }
            features.insert(key.clone(), per_step);
        }
        Ok(Batch {
            ids: samples.iter().map(|s| s.id.clone()).collect(),
            labels: samples.iter().map(|s| s.label).collect(),
            lengths,
            steps,
            features,
        })
    }

    /// One-row batch from a bare sequence.
    pub fn from_sequence(key: &str, seq: &FeatureSequence) -> Result<Self> {
        if seq.is_empty() {
            return Err(MctnError::EmptySequence);
        }
        let per_step = (0..seq.len())
            .map(|t| Tensor::matrix(1, seq.dim(), seq.frame(t).to_vec()))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let mut features = BTreeMap::new();
        features.insert(key.to_string(), per_step);
        Ok(Batch {
            ids: vec![String::new()],
            labels: vec![0.0],
            lengths: vec![seq.len()],
            steps: seq.len(),
            features,
        })
    }

    pub fn size(&self) -> usize {
        self.lengths.len()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn has(&self, key: &str) -> bool {
        self.features.contains_key(key)
    }

    pub fn feature(&self, key: &str) -> Result<&[Tensor]> {
        self.features
            .get(key)
            .map(Vec::as_slice)
            .ok_or_else(|| MctnError::UnknownModality(key.to_string()))
    }

    pub fn dim(&self, key: &str) -> Result<usize> {
        Ok(self.feature(key)?[0].cols())
    }

    /// Whether every row is still within its true length at step `t`.
    pub fn all_valid(&self, t: usize) -> bool {
        self.lengths.iter().all(|&l| t < l)
    }

    /// `B x 1` indicator of rows still within their true length at step `t`.
    pub fn mask(&self, t: usize) -> Tensor {
        let data = self.lengths.iter().map(|&l| if t < l { 1.0 } else { 0.0 }).collect();
        Tensor::matrix(self.size(), 1, data).expect("non-empty batch")
    }

    pub fn valid_frames(&self) -> usize {
        self.lengths.iter().sum()
    }

    /// Feature sequence of one row, truncated to its true length.
    pub fn row_sequence(&self, key: &str, row: usize) -> Result<FeatureSequence> {
        let steps = self.feature(key)?;
        let frames: Vec<Vec<f64>> = (0..self.lengths[row]).map(|t| steps[t].row(row).to_vec()).collect();
        FeatureSequence::from_frames(&frames)
    }
}
