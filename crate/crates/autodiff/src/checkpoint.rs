//! Checkpoint pair: a JSON manifest plus a flat little-endian `f32` blob.
//!
//! The manifest lists every tensor with its shape and byte offset into the
//! blob, the blob length, and a SHA-256 digest of the blob. Callers may attach
//! an arbitrary JSON `topology` object describing how to rebuild the model.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AutodiffError, Result};
use crate::params::ParamStore;
use crate::tensor::Tensor;

pub const CHECKPOINT_FORMAT: &str = "mctn-checkpoint-v1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the blob.
    pub offset: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    /// Blob file name, relative to the manifest's directory.
    pub blob: String,
    pub blob_bytes: u64,
    pub blob_sha256: String,
    pub tensors: Vec<TensorEntry>,
    #[serde(default)]
    pub topology: serde_json::Value,
}

/// Paths of the manifest/blob pair for `stem` inside `dir`.
pub fn checkpoint_paths(dir: &Path, stem: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{stem}.json")), dir.join(format!("{stem}.bin")))
}

pub fn save_checkpoint(
    dir: &Path,
    stem: &str,
    store: &ParamStore,
    topology: serde_json::Value,
) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let (manifest_path, blob_path) = checkpoint_paths(dir, stem);
    let mut blob = Vec::with_capacity(store.num_scalars() * 4);
    let mut tensors = Vec::with_capacity(store.len());
    for (name, t) in store.named() {
        tensors.push(TensorEntry {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            offset: blob.len() as u64,
        });
        for &v in t.data() {
            blob.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let manifest = CheckpointManifest {
        format: CHECKPOINT_FORMAT.into(),
        blob: blob_path.file_name().unwrap().to_string_lossy().into_owned(),
        blob_bytes: blob.len() as u64,
        blob_sha256: hex::encode(Sha256::digest(&blob)),
        tensors,
        topology,
    };
    fs::write(&blob_path, &blob)?;
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest_path)
}

pub fn read_manifest(manifest_path: &Path) -> Result<CheckpointManifest> {
    let text = fs::read_to_string(manifest_path)?;
    let manifest: CheckpointManifest = serde_json::from_str(&text)?;
    if manifest.format != CHECKPOINT_FORMAT {
        return Err(AutodiffError::Checkpoint(format!(
            "unsupported format '{}'",
            manifest.format
        )));
    }
    Ok(manifest)
}

/// Loads and verifies a checkpoint, returning named tensors in manifest order.
pub fn load_checkpoint(manifest_path: &Path) -> Result<(CheckpointManifest, Vec<(String, Tensor)>)> {
    let manifest = read_manifest(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let blob = fs::read(dir.join(&manifest.blob))?;
    if blob.len() as u64 != manifest.blob_bytes {
        return Err(AutodiffError::Integrity(format!(
            "blob has {} bytes, manifest declares {}",
            blob.len(),
            manifest.blob_bytes
        )));
    }
    let digest = hex::encode(Sha256::digest(&blob));
    if digest != manifest.blob_sha256 {
        return Err(AutodiffError::Integrity("blob digest does not match manifest".into()));
    }
    let mut out = Vec::with_capacity(manifest.tensors.len());
    for entry in &manifest.tensors {
        let n: usize = entry.shape.iter().product();
        let start = entry.offset as usize;
        let end = start + 4 * n;
        if end > blob.len() {
            return Err(AutodiffError::Integrity(format!(
                "tensor {} extends past the end of the blob",
                entry.name
            )));
        }
        let data = blob[start..end]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        out.push((entry.name.clone(), Tensor::new(entry.shape.clone(), data)?));
    }
    Ok((manifest, out))
}
