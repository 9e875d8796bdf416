//! Versioned binary checkpoints: magic, format version, a JSON header with
//! names, shapes and the configuration, then little-endian `f32` blobs for
//! every parameter followed by both moment buffers.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{TrainConfig, TrainError};
use crate::autodiff::{OptimizerState, Tensor};
use crate::fields::Model;
use crate::io::IoError;

const MAGIC: &[u8; 8] = b"GLNRFCKP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
    updates: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    iteration: u64,
    optimizer_step: u64,
    config: TrainConfig,
    params: Vec<ParamEntry>,
}

/// Model, optimizer state and the iteration they belong to.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub iteration: u64,
    pub config: TrainConfig,
    pub model: Model<f32>,
    pub optimizer: OptimizerState<f32>,
}

fn put(out: &mut Vec<u8>, data: &[f32]) {
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let store = &self.model.store;
        let params = store
            .ids()
            .map(|id| ParamEntry {
                name: store.name(id).to_string(),
                shape: store.get(id).shape().to_vec(),
                updates: self.optimizer.updates(id),
            })
            .collect();
        let header = Header {
            version: FORMAT_VERSION,
            iteration: self.iteration,
            optimizer_step: self.optimizer.step(),
            config: self.config.clone(),
            params,
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for id in store.ids() {
            put(&mut out, store.get(id).data());
        }
        for id in store.ids() {
            let (m, v) = self.optimizer.moments(id);
            put(&mut out, m);
            put(&mut out, v);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TrainError> {
        let corrupt = |msg: &str| TrainError::Checkpoint(msg.to_string());
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(corrupt("not a checkpoint file (bad magic)"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(TrainError::Checkpoint(format!(
                "format version {version}, expected {FORMAT_VERSION}"
            )));
        }
        let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let json = bytes.get(20..20 + len).ok_or_else(|| corrupt("truncated header"))?;
        let header: Header =
            serde_json::from_slice(json).map_err(|e| TrainError::Checkpoint(format!("header: {e}")))?;
        let mut model = Model::<f32>::new(header.config.field.clone());
        if model.store.len() != header.params.len() {
            return Err(corrupt("parameter count does not match the configured architecture"));
        }
        let mut cursor = 20 + len;
        let mut take = |n: usize| -> Result<Vec<f32>, TrainError> {
            let end = cursor + 4 * n;
            let chunk = bytes.get(cursor..end).ok_or_else(|| corrupt("truncated data"))?;
            cursor = end;
            Ok(chunk
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect())
        };
        let ids: Vec<_> = model.store.ids().collect();
        for (&id, entry) in ids.iter().zip(&header.params) {
            let t = model.store.get(id);
            if model.store.name(id) != entry.name || t.shape() != entry.shape.as_slice() {
                return Err(TrainError::Checkpoint(format!(
                    "parameter `{}` {:?} does not match architecture `{}` {:?}",
                    entry.name,
                    entry.shape,
                    model.store.name(id),
                    t.shape()
                )));
            }
            let data = take(t.len())?;
            let mut restored = Tensor::new(&entry.shape, data).map_err(|e| TrainError::Checkpoint(e.to_string()))?;
            restored.set_requires_grad(true);
            *model.store.get_mut(id) = restored;
        }
        let mut optimizer = OptimizerState::new(&model.store, header.config.adam, header.config.schedule());
        for (&id, entry) in ids.iter().zip(&header.params) {
            let n = model.store.get(id).len();
            let m = take(n)?;
            let v = take(n)?;
            optimizer
                .restore(header.optimizer_step, id, m, v, entry.updates)
                .map_err(|e| TrainError::Checkpoint(e.to_string()))?;
        }
        if cursor != bytes.len() {
            return Err(corrupt("trailing bytes after the last blob"));
        }
        Ok(Self {
            iteration: header.iteration,
            config: header.config,
            model,
            optimizer,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| IoError::file(dir, e))?;
        }
        let tmp = path.with_extension("tmp");
        let mut f = fs::File::create(&tmp).map_err(|e| IoError::file(&tmp, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| IoError::file(&tmp, e))?;
        drop(f);
        fs::rename(&tmp, path).map_err(|e| IoError::file(path, e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let bytes = fs::read(path).map_err(|e| IoError::file(path, e))?;
        Self::from_bytes(&bytes)
    }
}
