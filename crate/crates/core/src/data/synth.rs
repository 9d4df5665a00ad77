//! Synthetic aligned multimodal data.
//!
//! Every sample has a latent AR(1) sequence `z` (`len x latent_dim`). Each
//! modality observes `A_m z_t + noise` for a fixed random matrix `A_m`, and
//! the label is `3 tanh(u . mean_t z_t + 0.5 mean_t z_t0 z_t1)`, so labels lie
//! in `(-3, 3)` and depend on the latent both linearly and nonlinearly.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dataset::{ModalityInfo, MultimodalDataset, Sample, Split, Task};
use super::sequence::FeatureSequence;
use crate::error::{MctnError, Result};
use crate::metrics::pearson_r;

pub const DEFAULT_MODALITY_NAMES: [&str; 3] = ["language", "visual", "acoustic"];

/// Number of fresh samples drawn for the generation-time readout check.
pub const READOUT_CHECK_SAMPLES: usize = 500;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub len: usize,
    pub dims: Vec<usize>,
    /// Defaults to language/visual/acoustic, then `m3`, `m4`, ...
    #[serde(default)]
    pub names: Option<Vec<String>>,
    pub noise: f64,
    pub seed: u64,
    #[serde(default = "default_latent_dim")]
    pub latent_dim: usize,
    /// All modalities share the first modality's map (dims must be equal).
    #[serde(default)]
    pub tied_maps: bool,
}

fn default_latent_dim() -> usize {
    4
}

impl SynthSpec {
    pub fn new(n: usize, len: usize, dims: Vec<usize>, noise: f64, seed: u64) -> Self {
        SynthSpec { n, len, dims, names: None, noise, seed, latent_dim: 4, tied_maps: false }
    }

    pub fn modality_names(&self) -> Vec<String> {
        match &self.names {
            Some(n) => n.clone(),
            None => (0..self.dims.len())
                .map(|i| match DEFAULT_MODALITY_NAMES.get(i) {
                    Some(s) => s.to_string(),
                    None => format!("m{i}"),
                })
                .collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(MctnError::Config(format!("synthetic spec: {m}")));
        if self.n < 3 {
            return bad("need at least 3 samples for train/valid/test splits");
        }
        if self.len == 0 || self.latent_dim == 0 {
            return bad("len and latent_dim must be positive");
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return bad("every modality needs a positive dim");
        }
        if self.modality_names().len() != self.dims.len() {
            return bad("names and dims differ in count");
        }
        if !(self.noise >= 0.0) {
            return bad("noise must be non-negative");
        }
        if self.tied_maps && self.dims.iter().any(|&d| d != self.dims[0]) {
            return bad("tied maps need equal dims");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub dataset: MultimodalDataset,
    /// Per modality: correlation between the label and its best linear readout
    /// from time-averaged features, over a fresh Monte-Carlo draw.
    pub readout_corr: Vec<(String, f64)>,
}

struct Generator {
    maps: Vec<DMatrix<f64>>,
    direction: DVector<f64>,
    spec: SynthSpec,
}

impl Generator {
    fn new(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Self {
        let k = spec.latent_dim;
        let scale = 1.0 / (k as f64).sqrt();
        let mut maps: Vec<DMatrix<f64>> = Vec::new();
        for (i, &d) in spec.dims.iter().enumerate() {
            if spec.tied_maps && i > 0 {
                maps.push(maps[0].clone());
            } else {
                maps.push(DMatrix::from_fn(d, k, |_, _| scale * rng.sample::<f64, _>(StandardNormal)));
            }
        }
        let mut u = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        u /= u.norm();
        Generator { maps, direction: u * 1.5, spec: spec.clone() }
    }

    /// Returns per-modality frames and the label.
    fn sample(&self, rng: &mut ChaCha8Rng) -> (Vec<Vec<Vec<f64>>>, f64) {
        let (k, len) = (self.spec.latent_dim, self.spec.len);
        let mut z = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut latent = Vec::with_capacity(len);
        for t in 0..len {
            if t > 0 {
                let eps = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
                z = &z * 0.6 + eps * 0.8;
            }
            latent.push(z.clone());
        }
        let mut modalities = Vec::with_capacity(self.maps.len());
        for map in &self.maps {
            let frames = latent
                .iter()
                .map(|zt| {
                    let x = map * zt;
                    x.iter()
                        .map(|v| v + self.spec.noise * rng.sample::<f64, _>(StandardNormal))
                        .collect()
                })
                .collect();
            modalities.push(frames);
        }
        let mean = latent.iter().fold(DVector::zeros(k), |acc, zt| acc + zt) / len as f64;
        let inter = if k >= 2 {
            latent.iter().map(|zt| zt[0] * zt[1]).sum::<f64>() / len as f64
        } else {
            latent.iter().map(|zt| zt[0] * zt[0] - 1.0).sum::<f64>() / len as f64
        };
        let label = 3.0 * (self.direction.dot(&mean) + 0.5 * inter).tanh();
        (modalities, label)
    }
}

fn readout_correlation(features: &[Vec<f64>], labels: &[f64]) -> Result<f64> {
    let n = features.len();
    let d = features[0].len();
    let x = DMatrix::from_fn(n, d + 1, |r, c| if c == 0 { 1.0 } else { features[r][c - 1] });
    let y = DVector::from_column_slice(labels);
    let svd = x.clone().svd(true, true);
    let beta = svd.solve(&y, 1e-12).map_err(|e| MctnError::Metric(e.to_string()))?;
    let fitted: Vec<f64> = (x * beta).iter().copied().collect();
    pearson_r(&fitted, labels)
}

/// Generates a seeded dataset with 70/10/20 train/valid/test splits.
pub fn synth_generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let names = spec.modality_names();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let generator = Generator::new(spec, &mut rng);

    let mut order: Vec<usize> = (0..spec.n).collect();
    order.shuffle(&mut rng);
    let n_valid = ((spec.n as f64 * 0.1).round() as usize).max(1);
    let n_test = ((spec.n as f64 * 0.2).round() as usize).max(1);
    let n_train = spec.n - n_valid - n_test;
    let mut splits = vec![Split::Train; spec.n];
    for (rank, &idx) in order.iter().enumerate() {
        splits[idx] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_valid {
            Split::Valid
        } else {
            Split::Test
        };
    }

    let mut samples = Vec::with_capacity(spec.n);
    for (i, split) in splits.into_iter().enumerate() {
        let (mods, label) = generator.sample(&mut rng);
        let mut features = BTreeMap::new();
        for (name, frames) in names.iter().zip(mods) {
            features.insert(name.clone(), FeatureSequence::from_frames(&frames)?);
        }
        samples.push(Sample { id: format!("syn{i:05}"), features, label, split });
    }

    let mut check_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed_c0ffee);
    let mut pooled: Vec<Vec<Vec<f64>>> = vec![Vec::new(); names.len()];
    let mut labels = Vec::with_capacity(READOUT_CHECK_SAMPLES);
    for _ in 0..READOUT_CHECK_SAMPLES {
        let (mods, label) = generator.sample(&mut check_rng);
        for (m, frames) in mods.iter().enumerate() {
            let d = frames[0].len();
            let mean: Vec<f64> = (0..d)
                .map(|j| frames.iter().map(|f| f[j]).sum::<f64>() / frames.len() as f64)
                .collect();
            pooled[m].push(mean);
        }
        labels.push(label);
    }
    let readout_corr = names
        .iter()
        .zip(&pooled)
        .map(|(name, feats)| readout_correlation(feats, &labels).map(|r| (name.clone(), r)))
        .collect::<Result<Vec<_>>>()?;

    let dataset = MultimodalDataset {
        name: format!("synthetic-{}", spec.seed),
        task: Task::Regression,
        modalities: names
            .iter()
            .zip(&spec.dims)
            .map(|(name, &dim)| ModalityInfo { name: name.clone(), dim })
            .collect(),
        samples,
    };
    dataset.validate()?;
    Ok(SynthOutput { dataset, readout_corr })
}
