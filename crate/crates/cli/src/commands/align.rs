//! Word-level alignment of raw feature streams into a dataset directory.
//!
//! The input is a JSON file:
//!
//! ```json
//! {
//!   "name": "clips",
//!   "task": "regression",
//!   "modalities": [
//!     {"name": "language", "dim": 300},
//!     {"name": "visual", "dim": 35, "rate": 30.0}
//!   ],
//!   "samples": [
//!     {"id": "c1", "label": 1.5, "split": "train", "intervals": "c1.words.csv",
//!      "files": {"language": "c1.language.csv", "visual": "c1.visual.csv"}}
//!   ]
//! }
//! ```
//!
//! Interval files hold one `start,end` row (seconds) per word. Modalities with
//! a `rate` are raw frame streams averaged over each interval; modalities
//! without one are already word-level and must have one row per word. Paths
//! are relative to the input file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use mctn::data::{
    align_by_intervals, read_frames_csv, save_dataset, zero_pad, IntervalTable, ModalityInfo, MultimodalDataset,
    Sample, Split, Task,
};
use serde::Deserialize;

#[derive(Args, Debug)]
pub struct AlignArgs {
    /// Alignment description (JSON).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AlignModality {
    name: String,
    dim: usize,
    #[serde(default)]
    rate: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AlignSample {
    id: String,
    label: f64,
    split: Split,
    intervals: PathBuf,
    files: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AlignSpec {
    name: String,
    task: Task,
    modalities: Vec<AlignModality>,
    samples: Vec<AlignSample>,
}

pub struct AlignSummary {
    pub dataset: MultimodalDataset,
    pub manifest: PathBuf,
    pub empty_intervals: usize,
}

fn read_intervals(path: &Path) -> Result<IntervalTable> {
    let rows = read_frames_csv(path)?;
    let pairs = rows
        .iter()
        .enumerate()
        .map(|(i, r)| match r.as_slice() {
            [s, e] => Ok((*s, *e)),
            _ => bail!("{}: row {i} should be start,end", path.display()),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IntervalTable::new(pairs)?)
}

pub fn align(input: &Path, out: &Path) -> Result<AlignSummary> {
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let spec: AlignSpec = serde_json::from_str(&text).with_context(|| format!("parsing {}", input.display()))?;
    let root = input.parent().unwrap_or(Path::new("."));
    let mut samples = Vec::with_capacity(spec.samples.len());
    let mut empty = 0;
    for s in &spec.samples {
        let table = read_intervals(&root.join(&s.intervals))?;
        if table.is_empty() {
            bail!("sample '{}' has no word intervals", s.id);
        }
        let mut features = BTreeMap::new();
        for m in &spec.modalities {
            let Some(file) = s.files.get(&m.name) else { bail!("sample '{}' lists no file for '{}'", s.id, m.name) };
            let frames = read_frames_csv(&root.join(file))?;
            let rows = match m.rate {
                Some(rate) => {
                    let a = align_by_intervals(&frames, rate, &table)?;
                    empty += a.empty_intervals;
                    a.rows
                }
                None if frames.len() == table.len() => frames,
                None => bail!(
                    "sample '{}': word-level modality '{}' has {} rows for {} words",
                    s.id,
                    m.name,
                    frames.len(),
                    table.len()
                ),
            };
            features.insert(m.name.clone(), zero_pad(&rows, table.len())?);
        }
        samples.push(Sample { id: s.id.clone(), features, label: s.label, split: s.split });
    }
    let dataset = MultimodalDataset {
        name: spec.name,
        task: spec.task,
        modalities: spec.modalities.iter().map(|m| ModalityInfo { name: m.name.clone(), dim: m.dim }).collect(),
        samples,
    };
    let manifest = save_dataset(&dataset, out)?;
    Ok(AlignSummary { dataset, manifest, empty_intervals: empty })
}

pub fn run(args: &AlignArgs) -> Result<()> {
    let s = align(&args.input, &args.out)?;
    println!("wrote {} ({} samples)", s.manifest.display(), s.dataset.len());
    if s.empty_intervals > 0 {
        println!("  {} word intervals contained no frames and were zero-filled", s.empty_intervals);
    }
    Ok(())
}
