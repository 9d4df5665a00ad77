//! On-disk dataset format.
//!
//! A dataset directory holds `manifest.json` and one headerless CSV per sample
//! and modality (rows are timesteps). The manifest looks like:
//!
//! ```json
//! {
//!   "name": "toy",
//!   "task": "regression",
//!   "modalities": [{"name": "language", "dim": 3}, {"name": "visual", "dim": 2}],
//!   "samples": [
//!     {"id": "s0", "label": 1.5, "split": "train", "length": 4,
//!      "files": {"language": "data/s0.language.csv", "visual": "data/s0.visual.csv"}}
//!   ]
//! }
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::sequence::{zero_pad, FeatureSequence};
use crate::error::{MctnError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = MctnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" | "validation" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(MctnError::Config(format!("unknown split '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModalityInfo {
    pub name: String,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    pub features: BTreeMap<String, FeatureSequence>,
    /// Real-valued target, or a 0-based class index for classification.
    pub label: f64,
    pub split: Split,
}

impl Sample {
    pub fn len(&self) -> usize {
        self.features.values().next().map_or(0, FeatureSequence::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn feature(&self, modality: &str) -> Result<&FeatureSequence> {
        self.features.get(modality).ok_or_else(|| MctnError::UnknownModality(modality.into()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultimodalDataset {
    pub name: String,
    pub task: Task,
    pub modalities: Vec<ModalityInfo>,
    pub samples: Vec<Sample>,
}

impl MultimodalDataset {
    pub fn dim(&self, modality: &str) -> Option<usize> {
        self.modalities.iter().find(|m| m.name == modality).map(|m| m.dim)
    }

    pub fn modality_names(&self) -> Vec<String> {
        self.modalities.iter().map(|m| m.name.clone()).collect()
    }

    pub fn dims(&self) -> BTreeMap<String, usize> {
        self.modalities.iter().map(|m| (m.name.clone(), m.dim)).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn split(&self, split: Split) -> Vec<&Sample> {
        self.samples.iter().filter(|s| s.split == split).collect()
    }

    pub fn max_len(&self) -> usize {
        self.samples
            .iter()
            .flat_map(|s| s.features.values().map(FeatureSequence::max_len))
            .max()
            .unwrap_or(0)
    }

    /// Number of classes (classification) or 1 (regression).
    pub fn num_classes(&self) -> usize {
        match self.task {
            Task::Regression => 1,
            Task::Classification => {
                let max = self.samples.iter().map(|s| s.label as usize).max().unwrap_or(0);
                (max + 1).max(2)
            }
        }
    }

    /// `max(label) - min(label)` over all samples.
    pub fn label_range(&self) -> f64 {
        let (lo, hi) = self
            .samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.label), hi.max(s.label)));
        if lo.is_finite() {
            hi - lo
        } else {
            0.0
        }
    }

    /// Checks the dataset invariants.
    pub fn validate(&self) -> Result<()> {
        if self.modalities.is_empty() {
            return Err(MctnError::Schema("no modalities declared".into()));
        }
        for s in &self.samples {
            let sample_err = |reason: String| MctnError::Sample { sample: s.id.clone(), reason };
            if !s.label.is_finite() {
                return Err(sample_err("non-finite label".into()));
            }
            if self.task == Task::Classification && (s.label < 0.0 || s.label.fract() != 0.0) {
                return Err(sample_err(format!(
                    "classification label {} is not a 0-based class index",
                    s.label
                )));
            }
            let mut length = None;
            for (name, seq) in &s.features {
                let dim = self
                    .dim(name)
                    .ok_or_else(|| sample_err(format!("undeclared modality '{name}'")))?;
                if seq.dim() != dim {
                    return Err(sample_err(format!(
                        "modality '{name}' has dim {}, declared {dim}",
                        seq.dim()
                    )));
                }
                if !seq.all_finite() {
                    return Err(sample_err(format!("modality '{name}' has non-finite values")));
                }
                match length {
                    None => length = Some(seq.len()),
                    Some(l) if l != seq.len() => {
                        return Err(sample_err(format!(
                            "modality '{name}' has length {}, other modalities have {l}",
                            seq.len()
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    name: String,
    task: Task,
    modalities: Vec<ModalityInfo>,
    samples: Vec<SampleRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleRecord {
    id: String,
    label: f64,
    split: Split,
    length: usize,
    files: BTreeMap<String, String>,
}

/// Restricts which modalities are read from disk.
#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    /// Only these modalities are loaded (all when `None`). Files of other
    /// modalities are never opened.
    pub modalities: Option<Vec<String>>,
}

fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    }
}

/// Reads the manifest's declared modalities without touching any CSV.
pub fn read_modalities(path: &Path) -> Result<(Task, Vec<ModalityInfo>)> {
    let manifest = read_manifest(&manifest_path(path))?;
    Ok((manifest.task, manifest.modalities))
}

fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path)
        .map_err(|source| MctnError::MissingFile { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|e| MctnError::Schema(e.to_string()))
}

pub fn load_dataset(path: &Path) -> Result<MultimodalDataset> {
    load_dataset_with(path, &LoadOptions::default())
}

/// Loads a dataset from a manifest file or a directory containing one.
///
/// Sample order follows the manifest. All sequences are zero-padded to the
/// longest declared length.
pub fn load_dataset_with(path: &Path, options: &LoadOptions) -> Result<MultimodalDataset> {
    let mpath = manifest_path(path);
    let manifest = read_manifest(&mpath)?;
    let root = mpath.parent().unwrap_or(Path::new(".")).to_path_buf();

    let wanted: Vec<ModalityInfo> = match &options.modalities {
        None => manifest.modalities.clone(),
        Some(names) => names
            .iter()
            .map(|n| {
                manifest
                    .modalities
                    .iter()
                    .find(|m| &m.name == n)
                    .cloned()
                    .ok_or_else(|| MctnError::UnknownModality(n.clone()))
            })
            .collect::<Result<_>>()?,
    };
    for m in &manifest.modalities {
        if m.dim == 0 {
            return Err(MctnError::Schema(format!("modality '{}' has dim 0", m.name)));
        }
    }
    let max_len = manifest.samples.iter().map(|s| s.length).max().unwrap_or(0);

    let mut samples = Vec::with_capacity(manifest.samples.len());
    for rec in &manifest.samples {
        let sample_err = |reason: String| MctnError::Sample { sample: rec.id.clone(), reason };
        if rec.length == 0 {
            return Err(sample_err("length must be positive".into()));
        }
        let mut features = BTreeMap::new();
        for m in &wanted {
            let rel = rec
                .files
                .get(&m.name)
                .ok_or_else(|| sample_err(format!("no file listed for modality '{}'", m.name)))?;
            let file = root.join(rel);
            let rows = read_frames_csv(&file).map_err(|e| match e {
                MctnError::MissingFile { .. } => e,
                other => sample_err(other.to_string()),
            })?;
            for (t, row) in rows.iter().enumerate() {
                if row.len() != m.dim {
                    return Err(sample_err(format!(
                        "modality '{}' row {t} has {} columns, declared dim {}",
                        m.name,
                        row.len(),
                        m.dim
                    )));
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(sample_err(format!(
                        "modality '{}' row {t} has a non-finite value",
                        m.name
                    )));
                }
            }
            if rows.len() < rec.length {
                return Err(sample_err(format!(
                    "modality '{}' has {} rows, declared length {}",
                    m.name,
                    rows.len(),
                    rec.length
                )));
            }
            if rows[rec.length..].iter().any(|r| r.iter().any(|&v| v != 0.0)) {
                return Err(sample_err(format!(
                    "modality '{}' has non-zero rows beyond declared length {}",
                    m.name, rec.length
                )));
            }
            features.insert(m.name.clone(), zero_pad(&rows[..rec.length], max_len)?);
        }
        samples.push(Sample { id: rec.id.clone(), features, label: rec.label, split: rec.split });
    }

    let ds = MultimodalDataset {
        name: manifest.name,
        task: manifest.task,
        modalities: manifest.modalities,
        samples,
    };
    ds.validate()?;
    Ok(ds)
}

pub fn read_frames_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let file = fs::File::open(path)
        .map_err(|source| MctnError::MissingFile { path: path.display().to_string(), source })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|_| {
                    MctnError::Schema(format!("{}: row {i}: cannot parse '{field}'", path.display()))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_frames_csv(path: &Path, frames: &[Vec<f64>]) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for row in frames {
        writer.write_record(row.iter().map(|v| v.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

/// Writes `manifest.json` plus unpadded CSVs under `dir/data/`.
pub fn save_dataset(ds: &MultimodalDataset, dir: &Path) -> Result<PathBuf> {
    ds.validate()?;
    fs::create_dir_all(dir.join("data"))?;
    let mut records = Vec::with_capacity(ds.samples.len());
    for (i, s) in ds.samples.iter().enumerate() {
        let mut files = BTreeMap::new();
        for (name, seq) in &s.features {
            let rel = format!("data/{:05}_{}.{}.csv", i, file_stem(&s.id), file_stem(name));
            write_frames_csv(&dir.join(&rel), &seq.frames())?;
            files.insert(name.clone(), rel);
        }
        records.push(SampleRecord {
            id: s.id.clone(),
            label: s.label,
            split: s.split,
            length: s.len(),
            files,
        });
    }
    let manifest = Manifest {
        name: ds.name.clone(),
        task: ds.task,
        modalities: ds.modalities.clone(),
        samples: records,
    };
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) {
        fs::write(dir.join(name), text).unwrap();
    }

    fn manifest(dim: usize) -> String {
        format!(
            r#"{{"name":"t","task":"regression","modalities":[{{"name":"language","dim":{dim}}}],
            "samples":[{{"id":"s0","label":0.5,"split":"train","length":2,"files":{{"language":"a.csv"}}}}]}}"#
        )
    }

    #[test]
    fn minimal_manifest_loads() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "manifest.json", &manifest(3));
        write(dir.path(), "a.csv", "1,2,3\n4,5,6\n");
        let ds = load_dataset(dir.path()).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.samples[0].feature("language").unwrap().frames()[1], vec![4.0, 5.0, 6.0]);
    }

    #[test]
    fn dim_mismatch_names_sample() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "manifest.json", &manifest(3));
        write(dir.path(), "a.csv", "1,2,3,4\n4,5,6,7\n");
        let err = load_dataset(dir.path()).unwrap_err();
        match err {
            MctnError::Sample { sample, reason } => {
                assert_eq!(sample, "s0");
                assert!(reason.contains("declared dim 3"), "{reason}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn schema_violation_names_field() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "manifest.json",
            r#"{"name":"t","task":"regression","modalities":[],"samples":[{"id":"s0","split":"train","length":1,"files":{}}]}"#,
        );
        let err = load_dataset(dir.path()).unwrap_err().to_string();
        assert!(err.contains("label"), "{err}");
    }

    #[test]
    fn missing_file_and_non_finite_values() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "manifest.json", &manifest(1));
        assert!(matches!(load_dataset(dir.path()), Err(MctnError::MissingFile { .. })));
        write(dir.path(), "a.csv", "1\nNaN\n");
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(matches!(err, MctnError::Sample { ref sample, .. } if sample == "s0"), "{err}");
    }

    #[test]
    fn rejects_length_disagreement_between_modalities() {
        let mut features = BTreeMap::new();
        features.insert("a".to_string(), zero_pad(&[vec![1.0], vec![2.0]], 3).unwrap());
        features.insert("b".to_string(), zero_pad(&[vec![1.0]], 3).unwrap());
        let ds = MultimodalDataset {
            name: "x".into(),
            task: Task::Regression,
            modalities: vec![
                ModalityInfo { name: "a".into(), dim: 1 },
                ModalityInfo { name: "b".into(), dim: 1 },
            ],
            samples: vec![Sample { id: "q".into(), features, label: 0.0, split: Split::Train }],
        };
        assert!(matches!(ds.validate(), Err(MctnError::Sample { .. })));
    }

    #[test]
    fn subset_load_never_opens_other_files() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "manifest.json",
            r#"{"name":"t","task":"regression","modalities":[{"name":"a","dim":1},{"name":"b","dim":1}],
            "samples":[{"id":"s0","label":1.0,"split":"test","length":1,"files":{"a":"a.csv","b":"missing.csv"}}]}"#,
        );
        write(dir.path(), "a.csv", "2\n");
        let opts = LoadOptions { modalities: Some(vec!["a".into()]) };
        let ds = load_dataset_with(dir.path(), &opts).unwrap();
        assert_eq!(ds.samples[0].features.len(), 1);
        assert!(load_dataset(dir.path()).is_err());
    }
}
