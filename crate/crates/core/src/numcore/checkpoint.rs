//! Checkpoint container.
//!
//! Byte layout (all integers and floats little-endian):
//!
//! ```text
//! offset 0        8 bytes   magic "FCELCKPT"
//! offset 8        u64       header length H in bytes
//! offset 16       H bytes   UTF-8 JSON header
//! offset 16+H     ...       data section: f64 values, tensor after tensor
//! ```
//!
//! The header is `{"version":1,"meta":{...},"tensors":[{"name","shape","offset"},...]}`
//! where `offset` is the byte offset of the tensor inside the data section.
//! Tensors are stored in parameter registration order.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ParamStore, Tensor, TensorError};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"FCELCKPT";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    meta: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

/// A decoded checkpoint: named tensors plus free-form metadata.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub meta: serde_json::Value,
    pub entries: Vec<TensorEntry>,
    pub tensors: HashMap<String, Tensor>,
}

pub fn encode(store: &ParamStore, meta: &serde_json::Value) -> Vec<u8> {
    let mut entries = Vec::with_capacity(store.len());
    let mut offset = 0u64;
    for (_, name, t) in store.iter() {
        entries.push(TensorEntry {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            offset,
        });
        offset += 8 * t.numel() as u64;
    }
    let header = Header {
        version: VERSION,
        meta: meta.clone(),
        tensors: entries,
    };
    let header_bytes = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(16 + header_bytes.len() + offset as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    for t in store.values() {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing checkpoint magic"));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let data_start = 16usize
        .checked_add(hlen)
        .ok_or_else(|| bad("header length overflow"))?;
    if bytes.len() < data_start {
        return Err(bad("truncated header"));
    }
    let header: Header = serde_json::from_slice(&bytes[16..data_start])?;
    if header.version != VERSION {
        return Err(bad(&format!(
            "unsupported checkpoint version {}",
            header.version
        )));
    }
    let data = &bytes[data_start..];
    let mut tensors = HashMap::new();
    for e in &header.tensors {
        let n: usize = e.shape.iter().product();
        let start = e.offset as usize;
        let end = start + 8 * n;
        if end > data.len() {
            return Err(bad(&format!("tensor {} extends past end of file", e.name)));
        }
        let values: Vec<f64> = data[start..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let t = Tensor::new(e.shape.clone(), values).map_err(Error::Tensor)?;
        tensors.insert(e.name.clone(), t);
    }
    Ok(Checkpoint {
        meta: header.meta,
        entries: header.tensors,
        tensors,
    })
}

pub fn save(path: &Path, store: &ParamStore, meta: &serde_json::Value) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(store, meta))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

impl Checkpoint {
    pub fn restore_into(&self, store: &mut ParamStore) -> std::result::Result<(), TensorError> {
        store.load_values(&self.tensors)
    }
}
