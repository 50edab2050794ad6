//! Checkpoint files: a versioned JSON manifest next to a little-endian
//! `f64` blob whose layout the manifest's tensor table defines.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::matrix::Matrix;

pub const CHECKPOINT_FORMAT: &str = "parcelplan-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// Offset into the blob, counted in `f64` values.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub config_hash: String,
    pub metadata: serde_json::Value,
    pub tensors: Vec<TensorEntry>,
    pub blob: String,
    pub total_values: usize,
}

/// Lowercase hex SHA-256 of the JSON encoding of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("json"), stem.with_extension("bin"))
}

/// Writes `<stem>.json` and `<stem>.bin`.
pub fn save(
    stem: &Path,
    seed: u64,
    config_hash: String,
    metadata: serde_json::Value,
    tensors: &[(String, &Matrix)],
) -> Result<Manifest> {
    let (json_path, bin_path) = paths(stem);
    let mut entries = Vec::with_capacity(tensors.len());
    let mut blob = Vec::new();
    let mut offset = 0;
    for (name, m) in tensors {
        if !m.is_finite() {
            return Err(Error::Contract(format!(
                "tensor {name} holds non-finite values"
            )));
        }
        entries.push(TensorEntry {
            name: name.clone(),
            rows: m.rows(),
            cols: m.cols(),
            offset,
        });
        offset += m.len();
        for v in m.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = Manifest {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        seed,
        config_hash,
        metadata,
        tensors: entries,
        blob: bin_path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default(),
        total_values: offset,
    };
    if let Some(dir) = json_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;
    fs::write(&bin_path, blob).map_err(|e| Error::io(&bin_path, e))?;
    Ok(manifest)
}

/// Reads a checkpoint written by [`save`]; `path` may name the stem or
/// either file.
pub fn load(path: &Path) -> Result<(Manifest, Vec<(String, Matrix)>)> {
    let (json_path, _) = paths(path);
    let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.format != CHECKPOINT_FORMAT {
        return Err(Error::Format(format!(
            "{} is not a checkpoint manifest",
            json_path.display()
        )));
    }
    if manifest.version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {}",
            manifest.version
        )));
    }
    let bin_path = json_path.with_file_name(&manifest.blob);
    let bytes = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    if bytes.len() != manifest.total_values * 8 {
        return Err(Error::Format(format!(
            "blob has {} bytes, manifest expects {}",
            bytes.len(),
            manifest.total_values * 8
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let mut tensors = Vec::with_capacity(manifest.tensors.len());
    for t in &manifest.tensors {
        let end = t.offset + t.rows * t.cols;
        if end > values.len() {
            return Err(Error::Format(format!("tensor {} exceeds blob", t.name)));
        }
        tensors.push((
            t.name.clone(),
            Matrix::from_vec(t.rows, t.cols, values[t.offset..end].to_vec())?,
        ));
    }
    Ok((manifest, tensors))
}
