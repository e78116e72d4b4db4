//! On-disk prepared dataset.
//!
//! A dataset directory holds:
//!
//! - `manifest.json`: [`DatasetManifest`]
//! - `encoder.json`: the fitted [`Encoder`]
//! - `net.json`: the Petri net
//! - `tensors.bin`: little-endian binary, laid out as
//!
//! ```text
//! magic     b"PNDS"
//! version   u32
//! places    u32   n
//! width     u32   w   (slots + token column)
//! columns   u32   m   (attribute columns)
//! traces    u32
//! adjacency n*n u8
//! normalized n*n f64
//! per trace:
//!   case id  u32 byte length, UTF-8 bytes
//!   steps    u32 k
//!   nodes    k*n*w u32   (row-major: step, place, column)
//!   attrs    k*m u32
//!   labels   k i32       (-2 skip, -1 unknown, else class)
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Dataset, EncodedTrace, Encoder, StepLabel};
use crate::error::{Error, Result};
use crate::petrinet::PetriNet;

pub const DATASET_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"PNDS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub places: usize,
    pub width: usize,
    pub attr_columns: usize,
    pub traces: usize,
    pub prefixes: usize,
    pub max_len: usize,
    pub num_classes: usize,
    pub vocab_hash: String,
    pub seed: u64,
    pub config_hash: String,
    /// SHA-256 of `tensors.bin`.
    pub tensors_sha256: String,
}

pub fn save_dataset(dir: &Path, ds: &Dataset, net: &PetriNet, seed: u64, config_hash: &str) -> Result<DatasetManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let bytes = encode_tensors(ds);
    let manifest = DatasetManifest {
        version: DATASET_VERSION,
        places: ds.adjacency.nrows(),
        width: ds.encoder.layout.width(),
        attr_columns: ds.encoder.attr_sizes().len(),
        traces: ds.traces.len(),
        prefixes: ds.num_prefixes(),
        max_len: ds.encoder.max_len,
        num_classes: ds.encoder.num_classes(),
        vocab_hash: ds.encoder.vocab_hash(),
        seed,
        config_hash: config_hash.to_owned(),
        tensors_sha256: hex::encode(Sha256::digest(&bytes)),
    };
    write(&dir.join("tensors.bin"), &bytes)?;
    write(&dir.join("encoder.json"), &serde_json::to_vec_pretty(&ds.encoder)?)?;
    write(&dir.join("net.json"), &serde_json::to_vec_pretty(net)?)?;
    write(&dir.join("manifest.json"), &serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn load_dataset(dir: &Path) -> Result<(Dataset, PetriNet, DatasetManifest)> {
    let manifest: DatasetManifest = serde_json::from_slice(&read(&dir.join("manifest.json"))?)?;
    if manifest.version != DATASET_VERSION {
        return Err(Error::Invalid(format!(
            "dataset version {} is not supported (expected {DATASET_VERSION})",
            manifest.version
        )));
    }
    let encoder: Encoder = serde_json::from_slice(&read(&dir.join("encoder.json"))?)?;
    let net: PetriNet = serde_json::from_slice(&read(&dir.join("net.json"))?)?;
    if encoder.vocab_hash() != manifest.vocab_hash {
        return Err(Error::VocabMismatch("encoder.json does not match the manifest".into()));
    }
    let bytes = read(&dir.join("tensors.bin"))?;
    if hex::encode(Sha256::digest(&bytes)) != manifest.tensors_sha256 {
        return Err(Error::Invalid("tensors.bin checksum mismatch".into()));
    }
    let ds = decode_tensors(&bytes, encoder)?;
    Ok((ds, net, manifest))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

fn encode_tensors(ds: &Dataset) -> Vec<u8> {
    let n = ds.adjacency.nrows();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    for v in [
        DATASET_VERSION,
        n as u32,
        ds.encoder.layout.width() as u32,
        ds.encoder.attr_sizes().len() as u32,
        ds.traces.len() as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend(ds.adjacency.iter());
    for v in &ds.normalized {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for t in &ds.traces {
        out.extend_from_slice(&(t.case_id.len() as u32).to_le_bytes());
        out.extend_from_slice(t.case_id.as_bytes());
        out.extend_from_slice(&(t.len() as u32).to_le_bytes());
        for v in t.nodes.iter().chain(t.attrs.iter()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for l in &t.labels {
            let code: i32 = match *l {
                StepLabel::Skip => -2,
                StepLabel::Unknown => -1,
                StepLabel::Class(c) => c as i32,
            };
            out.extend_from_slice(&code.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Invalid(format!("tensors.bin truncated at byte {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u32s(&mut self, count: usize) -> Result<Vec<u32>> {
        let raw = self.take(count * 4)?;
        Ok(raw.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

fn decode_tensors(bytes: &[u8], encoder: Encoder) -> Result<Dataset> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Invalid("tensors.bin has a bad magic number".into()));
    }
    let version = c.u32()?;
    if version != DATASET_VERSION {
        return Err(Error::Invalid(format!("tensors.bin version {version} is not supported")));
    }
    let n = c.u32()? as usize;
    let w = c.u32()? as usize;
    let m = c.u32()? as usize;
    let count = c.u32()? as usize;
    if w != encoder.layout.width() || m != encoder.attr_sizes().len() || n != encoder.layout.places {
        return Err(Error::Shape("tensors.bin shape differs from encoder.json".into()));
    }
    let adjacency = Array2::from_shape_vec((n, n), c.take(n * n)?.to_vec())
        .map_err(|e| Error::Shape(e.to_string()))?;
    let normalized: Vec<f64> = c
        .take(n * n * 8)?
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let normalized = Array2::from_shape_vec((n, n), normalized).map_err(|e| Error::Shape(e.to_string()))?;
    let mut traces = Vec::with_capacity(count);
    for _ in 0..count {
        let id_len = c.u32()? as usize;
        let case_id = String::from_utf8(c.take(id_len)?.to_vec())
            .map_err(|_| Error::Invalid("case id is not UTF-8".into()))?;
        let k = c.u32()? as usize;
        let nodes = Array3::from_shape_vec((k, n, w), c.u32s(k * n * w)?)
            .map_err(|e| Error::Shape(e.to_string()))?;
        let attrs = Array2::from_shape_vec((k, m), c.u32s(k * m)?).map_err(|e| Error::Shape(e.to_string()))?;
        let labels = c
            .u32s(k)?
            .into_iter()
            .map(|v| match v as i32 {
                -2 => StepLabel::Skip,
                -1 => StepLabel::Unknown,
                c => StepLabel::Class(c as u32),
            })
            .collect();
        traces.push(EncodedTrace {
            case_id,
            nodes,
            attrs,
            labels,
        });
    }
    if c.pos != bytes.len() {
        return Err(Error::Invalid("trailing bytes in tensors.bin".into()));
    }
    Ok(Dataset {
        encoder,
        adjacency,
        normalized,
        traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::EncoderConfig;
    use crate::synth::{loan_application_net, simulate_log, SimOptions};

    #[test]
    fn save_then_load_restores_everything() {
        let net = loan_application_net();
        let log = simulate_log(&net, 12, 3, &SimOptions::default());
        let enc = Encoder::fit(&net, &log, &EncoderConfig::default()).unwrap();
        let ds = Dataset::build(&net, enc, &log).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let saved = save_dataset(dir.path(), &ds, &net, 5, "abc").unwrap();
        let (back, net_back, manifest) = load_dataset(dir.path()).unwrap();
        assert_eq!(back, ds);
        assert_eq!(net_back, net);
        assert_eq!(manifest, saved);
    }

    #[test]
    fn corrupted_tensors_are_detected() {
        let net = loan_application_net();
        let log = simulate_log(&net, 3, 3, &SimOptions::default());
        let enc = Encoder::fit(&net, &log, &EncoderConfig::default()).unwrap();
        let ds = Dataset::build(&net, enc, &log).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(dir.path(), &ds, &net, 0, "").unwrap();
        let path = dir.path().join("tensors.bin");
        let mut bytes = fs::read(&path).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 1;
        fs::write(&path, bytes).unwrap();
        assert!(load_dataset(dir.path()).is_err());
    }
}
