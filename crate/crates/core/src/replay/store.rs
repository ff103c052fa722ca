//! The latent replay store and its `LRS1` file format.
//!
//! ```text
//! "LRS1" | codec u8 | l_ins u8 | reserved u16 (0) | T u32 | width u32 | chunk u32 | entries u32
//! entries × (16-byte entry header + payload)
//! ```
//!
//! All integers little-endian.

use std::path::Path;

use serde::Serialize;

use crate::error::{NclError, Result};
use crate::replay::codec::{decompress_latent, Codec, LatentActivations, ENTRY_HEADER_BYTES};
use crate::spike::LabeledTrain;

pub const STORE_MAGIC: &[u8; 4] = b"LRS1";
pub const STORE_HEADER_BYTES: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatentStore {
    pub codec: Codec,
    pub chunk: usize,
    pub timesteps: usize,
    pub width: usize,
    /// Insertion layer the activations were captured for (1-based).
    pub l_ins: usize,
    entries: Vec<LatentActivations>,
}

impl LatentStore {
    pub fn new(codec: Codec, chunk: usize, timesteps: usize, width: usize, l_ins: usize) -> Self {
        LatentStore {
            codec,
            chunk,
            timesteps,
            width,
            l_ins,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, entry: LatentActivations) -> Result<()> {
        if entry.codec != self.codec
            || entry.timesteps as usize != self.timesteps
            || entry.width as usize != self.width
            || entry.chunk as usize != self.chunk
        {
            return Err(NclError::contract(format!(
                "entry ({}, T={}, width={}, chunk={}) does not match store ({}, T={}, width={}, chunk={})",
                entry.codec, entry.timesteps, entry.width, entry.chunk, self.codec, self.timesteps, self.width, self.chunk
            )));
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> &[LatentActivations] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Payload plus per-entry header bytes; the file header is not counted.
    pub fn total_bytes(&self) -> usize {
        self.entries.iter().map(LatentActivations::encoded_len).sum()
    }

    pub fn payload_bytes(&self) -> usize {
        self.entries.iter().map(|e| e.payload.len()).sum()
    }

    pub fn any_saturated(&self) -> bool {
        self.entries.iter().any(LatentActivations::saturated)
    }

    /// Decompresses every entry, in store order.
    pub fn decompress_all(&self) -> Result<Vec<LabeledTrain>> {
        self.entries
            .iter()
            .map(|e| {
                Ok(LabeledTrain {
                    train: decompress_latent(e)?,
                    label: e.label as usize,
                })
            })
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(STORE_HEADER_BYTES + self.total_bytes());
        out.extend_from_slice(STORE_MAGIC);
        out.push(self.codec.id());
        out.push(self.l_ins as u8);
        out.extend_from_slice(&[0, 0]);
        for v in [self.timesteps, self.width, self.chunk, self.entries.len()] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for e in &self.entries {
            e.encode(&mut out);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<LatentStore> {
        let err = |offset: usize, message: &str| NclError::Decode {
            offset,
            message: message.to_string(),
        };
        if bytes.len() < 4 || &bytes[..4] != STORE_MAGIC {
            return Err(err(0, "bad magic"));
        }
        if bytes.len() < STORE_HEADER_BYTES {
            return Err(err(bytes.len(), "truncated store header"));
        }
        let codec = Codec::from_id(bytes[4]).map_err(|_| err(4, "unknown codec id"))?;
        let l_ins = bytes[5] as usize;
        let le32 = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
        let mut store = LatentStore::new(codec, le32(16), le32(8), le32(12), l_ins);
        let count = le32(20);
        let mut offset = STORE_HEADER_BYTES;
        for _ in 0..count {
            let (entry, next) = LatentActivations::decode(bytes, offset)?;
            store.push(entry).map_err(|_| err(offset, "entry shape differs from store header"))?;
            offset = next;
        }
        if offset != bytes.len() {
            return Err(err(offset, "trailing bytes"));
        }
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<LatentStore> {
        LatentStore::from_bytes(&std::fs::read(path)?)
    }
}

/// Hypothetical store size for another (timesteps, codec, chunk) setting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SizeRow {
    pub timesteps: usize,
    pub codec: Codec,
    pub chunk: usize,
    pub total_bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MemoryReport {
    pub total_bytes: usize,
    pub payload_bytes: usize,
    pub header_bytes: usize,
    /// Encoded size of each entry, header included.
    pub per_sample: Vec<usize>,
    pub alternates: Vec<SizeRow>,
}

/// Closed-form size of `entries` stored at `(timesteps, width)` with `codec`.
pub fn analytic_store_bytes(entries: usize, timesteps: usize, width: usize, codec: Codec, chunk: usize) -> usize {
    entries * (codec.payload_size(timesteps, width, chunk) + ENTRY_HEADER_BYTES)
}

/// Exact byte accounting of `store`, plus comparison rows for `alternates`.
pub fn latent_memory_report(store: &LatentStore, alternates: &[(usize, Codec, usize)]) -> MemoryReport {
    MemoryReport {
        total_bytes: store.total_bytes(),
        payload_bytes: store.payload_bytes(),
        header_bytes: store.len() * ENTRY_HEADER_BYTES,
        per_sample: store.entries().iter().map(LatentActivations::encoded_len).collect(),
        alternates: alternates
            .iter()
            .map(|&(timesteps, codec, chunk)| SizeRow {
                timesteps,
                codec,
                chunk,
                total_bytes: analytic_store_bytes(store.len(), timesteps, store.width, codec, chunk),
            })
            .collect(),
    }
}
