//! Versioned on-disk checkpoints: `checkpoint.json` plus raw little-endian
//! f64 arrays for the parameters and both Adam moments.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::arch::{NetParams, NetShape};
use super::linalg::Real;
use crate::dataset::{decode_f64s, sha256_hex, write_file};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

const PARAMS_FILE: &str = "params.f64";
const M_FILE: &str = "adam_m.f64";
const V_FILE: &str = "adam_v.f64";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayEntry {
    pub file: String,
    pub len: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub shape: NetShape,
    pub param_count: usize,
    pub seed: u64,
    pub step: u64,
    pub adam: AdamConfig,
    pub adam_t: u64,
    pub params: ArrayEntry,
    pub adam_m: ArrayEntry,
    pub adam_v: ArrayEntry,
    /// Caller-defined metadata, for example the training configuration.
    pub extra: serde_json::Value,
}

/// Network state in full precision, independent of the training precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub step: u64,
    pub params: NetParams<f64>,
    pub adam: AdamState<f64>,
    pub extra: serde_json::Value,
}

impl Checkpoint {
    pub fn from_state<T: Real>(
        seed: u64,
        step: u64,
        params: &NetParams<T>,
        adam: &AdamState<T>,
        extra: serde_json::Value,
    ) -> Self {
        let widen = |v: &[T]| v.iter().map(|x| x.f64()).collect::<Vec<f64>>();
        Checkpoint {
            seed,
            step,
            params: params.cast(),
            adam: AdamState { config: adam.config, m: widen(&adam.m), v: widen(&adam.v), t: adam.t },
            extra,
        }
    }

    pub fn adam_as<T: Real>(&self) -> AdamState<T> {
        let narrow = |v: &[f64]| v.iter().map(|&x| T::of(x)).collect::<Vec<T>>();
        AdamState { config: self.adam.config, m: narrow(&self.adam.m), v: narrow(&self.adam.v), t: self.adam.t }
    }

    pub fn shape(&self) -> NetShape {
        self.params.shape
    }
}

fn encode(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn write_array(dir: &Path, file: &str, values: &[f64], written: &mut Vec<PathBuf>) -> Result<ArrayEntry> {
    let bytes = encode(values);
    let path = dir.join(file);
    write_file(&path, &bytes)?;
    written.push(path);
    Ok(ArrayEntry { file: file.to_string(), len: values.len(), sha256: sha256_hex(&bytes) })
}

/// Writes the checkpoint into `dir` and returns the written paths, manifest last.
pub fn save_checkpoint(ckpt: &Checkpoint, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(4);
    let params = write_array(dir, PARAMS_FILE, &ckpt.params.data, &mut written)?;
    let adam_m = write_array(dir, M_FILE, &ckpt.adam.m, &mut written)?;
    let adam_v = write_array(dir, V_FILE, &ckpt.adam.v, &mut written)?;
    let manifest = CheckpointManifest {
        format_version: CHECKPOINT_VERSION,
        shape: ckpt.params.shape,
        param_count: ckpt.params.data.len(),
        seed: ckpt.seed,
        step: ckpt.step,
        adam: ckpt.adam.config,
        adam_t: ckpt.adam.t,
        params,
        adam_m,
        adam_v,
        extra: ckpt.extra.clone(),
    };
    let path = dir.join(CHECKPOINT_FILE);
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Manifest { path: path.clone(), source: e })?;
    write_file(&path, &json)?;
    written.push(path);
    Ok(written)
}

pub fn load_checkpoint_manifest(dir: &Path) -> Result<CheckpointManifest> {
    let path = dir.join(CHECKPOINT_FILE);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: CheckpointManifest =
        serde_json::from_slice(&bytes).map_err(|e| Error::Manifest { path: path.clone(), source: e })?;
    if manifest.format_version != CHECKPOINT_VERSION {
        return Err(Error::Version { path, found: manifest.format_version, expected: CHECKPOINT_VERSION });
    }
    manifest.shape.validate()?;
    if manifest.param_count != manifest.shape.param_count() {
        return Err(Error::Corrupt {
            path,
            reason: format!(
                "{} parameters listed, architecture has {}",
                manifest.param_count,
                manifest.shape.param_count()
            ),
        });
    }
    Ok(manifest)
}

fn read_array(dir: &Path, entry: &ArrayEntry, expected_len: usize) -> Result<Vec<f64>> {
    let path = dir.join(&entry.file);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    if entry.len != expected_len || bytes.len() != 8 * expected_len {
        return Err(Error::Corrupt {
            path,
            reason: format!("expected {expected_len} values, found {} bytes", bytes.len()),
        });
    }
    if sha256_hex(&bytes) != entry.sha256 {
        return Err(Error::Corrupt { path, reason: "content hash mismatch".into() });
    }
    let values = decode_f64s(&bytes);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Corrupt { path, reason: "non-finite value".into() });
    }
    Ok(values)
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let m = load_checkpoint_manifest(dir)?;
    let n = m.param_count;
    let params = NetParams::from_data(m.shape, read_array(dir, &m.params, n)?)?;
    let adam = AdamState { config: m.adam, m: read_array(dir, &m.adam_m, n)?, v: read_array(dir, &m.adam_v, n)?, t: m.adam_t };
    Ok(Checkpoint { seed: m.seed, step: m.step, params, adam, extra: m.extra })
}
