//! Checkpoint directory:
//!
//! - `manifest.json`: [`CheckpointManifest`] (architecture, vocabulary hash,
//!   parameter names and shapes in storage order)
//! - `params.bin`: `b"PNCK"`, `u32` version, `u32` block count, then per
//!   block `u32` rows, `u32` cols and `rows * cols` little-endian `f32`
//!   values in row-major order, blocks in [`Model::tensors`] order
//! - `encoder.json`, `net.json`: what is needed to encode new cases

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Architecture, Model};
use crate::encoding::Encoder;
use crate::error::{Error, Result};
use crate::petrinet::PetriNet;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"PNCK";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub version: u32,
    pub architecture: Architecture,
    pub vocab_hash: String,
    pub tensors: Vec<TensorInfo>,
    pub params_sha256: String,
}

pub fn save_checkpoint(dir: &Path, model: &Model<f32>, encoder: &Encoder, net: &PetriNet) -> Result<CheckpointManifest> {
    if Architecture::new(model.arch.config.clone(), encoder) != model.arch {
        return Err(Error::VocabMismatch("model was not built for this encoder".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tensors = model.tensors();
    let mut bytes = Vec::with_capacity(12 + model.num_parameters() * 4 + tensors.len() * 8);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (_, t) in &tensors {
        bytes.extend_from_slice(&(t.nrows() as u32).to_le_bytes());
        bytes.extend_from_slice(&(t.ncols() as u32).to_le_bytes());
        for v in t.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = CheckpointManifest {
        version: CHECKPOINT_VERSION,
        architecture: model.arch.clone(),
        vocab_hash: encoder.vocab_hash(),
        tensors: tensors
            .iter()
            .map(|(name, t)| TensorInfo {
                name: name.clone(),
                rows: t.nrows(),
                cols: t.ncols(),
            })
            .collect(),
        params_sha256: hex::encode(Sha256::digest(&bytes)),
    };
    let write = |name: &str, data: &[u8]| {
        let path = dir.join(name);
        fs::write(&path, data).map_err(|e| Error::io(path, e))
    };
    write("params.bin", &bytes)?;
    write("encoder.json", &serde_json::to_vec_pretty(encoder)?)?;
    write("net.json", &serde_json::to_vec_pretty(net)?)?;
    write("manifest.json", &serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Loads a checkpoint. With `expected_vocab_hash`, refuses checkpoints
/// trained on other vocabularies.
pub fn load_checkpoint(dir: &Path, expected_vocab_hash: Option<&str>) -> Result<(Model<f32>, Encoder, PetriNet)> {
    let read = |name: &str| {
        let path = dir.join(name);
        fs::read(&path).map_err(|e| Error::io(path, e))
    };
    let manifest: CheckpointManifest = serde_json::from_slice(&read("manifest.json")?)?;
    if manifest.version != CHECKPOINT_VERSION {
        return Err(Error::Invalid(format!("checkpoint version {} is not supported", manifest.version)));
    }
    let encoder: Encoder = serde_json::from_slice(&read("encoder.json")?)?;
    let net: PetriNet = serde_json::from_slice(&read("net.json")?)?;
    if encoder.vocab_hash() != manifest.vocab_hash {
        return Err(Error::VocabMismatch("encoder.json does not match the checkpoint manifest".into()));
    }
    if let Some(expected) = expected_vocab_hash {
        if expected != manifest.vocab_hash {
            return Err(Error::VocabMismatch(format!(
                "checkpoint vocabulary hash {} differs from dataset hash {expected}",
                manifest.vocab_hash
            )));
        }
    }
    let bytes = read("params.bin")?;
    if hex::encode(Sha256::digest(&bytes)) != manifest.params_sha256 {
        return Err(Error::Invalid("params.bin checksum mismatch".into()));
    }
    let mut model = Model::<f32>::new(manifest.architecture.clone(), 0)?;
    let u32_at = |pos: usize| -> Result<u32> {
        bytes
            .get(pos..pos + 4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .ok_or_else(|| Error::Invalid("params.bin truncated".into()))
    };
    if bytes.get(..4) != Some(MAGIC) || u32_at(4)? != CHECKPOINT_VERSION {
        return Err(Error::Invalid("params.bin has a bad header".into()));
    }
    let count = u32_at(8)? as usize;
    let names: Vec<String> = model.tensors().into_iter().map(|(n, _)| n).collect();
    if count != names.len() || manifest.tensors.iter().map(|t| &t.name).ne(names.iter()) {
        return Err(Error::Shape("checkpoint parameter list does not match the architecture".into()));
    }
    let mut pos = 12;
    for t in model.tensors_mut() {
        let (rows, cols) = (u32_at(pos)? as usize, u32_at(pos + 4)? as usize);
        pos += 8;
        if (rows, cols) != t.dim() {
            return Err(Error::Shape(format!("parameter block {:?} expected {:?}", (rows, cols), t.dim())));
        }
        let raw = bytes
            .get(pos..pos + rows * cols * 4)
            .ok_or_else(|| Error::Invalid("params.bin truncated".into()))?;
        let vals = raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
        *t = Array2::from_shape_vec((rows, cols), vals).map_err(|e| Error::Shape(e.to_string()))?;
        pos += rows * cols * 4;
    }
    if pos != bytes.len() {
        return Err(Error::Invalid("trailing bytes in params.bin".into()));
    }
    Ok((model, encoder, net))
}
