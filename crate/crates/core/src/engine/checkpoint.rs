//! Single-file checkpoint format.
//!
//! Layout (all integers little-endian):
//!
//! | bytes | content |
//! |---|---|
//! | 4 | magic `MOB1` |
//! | 4 | format version (`u32`) |
//! | 8 | header length `h` (`u64`) |
//! | 8 | tensor payload length `p` (`u64`) |
//! | h | JSON header: tensor manifest (`name`, `shape`) and the model state with tensor values removed |
//! | p | tensor values as `f64`, manifest order, row-major |
//! | 8 | CRC-64/XZ of every preceding byte (`u64`) |

use std::path::Path;

use crc::{Crc, CRC_64_XZ};
use serde::{Deserialize, Serialize};

use super::MobModel;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MOB1";
pub const CHECKPOINT_VERSION: u32 = 1;

const PREAMBLE: usize = 4 + 4 + 8 + 8;
const CRC64: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    manifest: Vec<ManifestEntry>,
    model: MobModel,
}

pub fn write_checkpoint(model: &MobModel) -> Result<Vec<u8>> {
    let mut hollow = model.clone();
    let mut manifest = Vec::new();
    let mut payload = Vec::new();
    for (name, tensor) in hollow.tensor_slots() {
        manifest.push(ManifestEntry {
            name,
            shape: tensor.shape().to_vec(),
        });
        for v in tensor.data() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        *tensor = tensor.hollow();
    }
    let header = serde_json::to_vec(&Header { manifest, model: hollow })?;
    let mut bytes = Vec::with_capacity(PREAMBLE + header.len() + payload.len() + 8);
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(header.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&header);
    bytes.extend_from_slice(&payload);
    let checksum = CRC64.checksum(&bytes);
    bytes.extend_from_slice(&checksum.to_le_bytes());
    Ok(bytes)
}

fn u64_at(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8-byte slice"))
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<MobModel> {
    if bytes.len() < PREAMBLE + 8 {
        return Err(Error::CheckpointTruncated(format!("{} bytes is shorter than the fixed preamble", bytes.len())));
    }
    if &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::CheckpointFormat("missing MOB1 magic bytes".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4-byte slice"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let header_len = u64_at(bytes, 8) as usize;
    let payload_len = u64_at(bytes, 16) as usize;
    let expected = PREAMBLE.saturating_add(header_len).saturating_add(payload_len).saturating_add(8);
    if bytes.len() < expected {
        return Err(Error::CheckpointTruncated(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    if bytes.len() > expected {
        return Err(Error::CheckpointFormat(format!("{} trailing bytes after the checksum", bytes.len() - expected)));
    }
    let body = &bytes[..expected - 8];
    let stored = u64_at(bytes, expected - 8);
    let computed = CRC64.checksum(body);
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }
    let header: Header = serde_json::from_slice(&body[PREAMBLE..PREAMBLE + header_len]).map_err(|e| Error::CheckpointFormat(format!("header: {e}")))?;
    let mut model = header.model;
    let payload = &body[PREAMBLE + header_len..];
    if !payload.len().is_multiple_of(8) {
        return Err(Error::CheckpointFormat("payload length is not a multiple of 8".into()));
    }
    let values: Vec<f64> = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    let slots = model.tensor_slots();
    if slots.len() != header.manifest.len() {
        return Err(Error::CheckpointFormat(format!("manifest lists {} tensors, model has {}", header.manifest.len(), slots.len())));
    }
    let mut offset = 0;
    for ((name, tensor), entry) in slots.into_iter().zip(&header.manifest) {
        if name != entry.name || tensor.shape() != entry.shape.as_slice() {
            return Err(Error::CheckpointFormat(format!("manifest entry {} does not match tensor {name}", entry.name)));
        }
        let n: usize = entry.shape.iter().product();
        let Some(chunk) = values.get(offset..offset + n) else {
            return Err(Error::CheckpointFormat(format!("payload ends inside tensor {name}")));
        };
        *tensor = crate::ndmath::Tensor::new(entry.shape.clone(), chunk.to_vec())?;
        offset += n;
    }
    if offset != values.len() {
        return Err(Error::CheckpointFormat(format!("{} unused payload values", values.len() - offset)));
    }
    model.validate()?;
    Ok(model)
}

pub fn save_checkpoint(model: &MobModel, path: &Path) -> Result<()> {
    let bytes = write_checkpoint(model)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<MobModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes)
}
