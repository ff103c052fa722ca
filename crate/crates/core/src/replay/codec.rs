//! Compression of stored spike activations.
//!
//! `bitpack` keeps one bit per (timestep, neuron) entry, LSB first in row-major
//! order. `ratechunk` keeps, per chunk of timesteps and per neuron, the spike count
//! as one byte; decompression spreads each count evenly across its chunk.

use serde::{Deserialize, Serialize};

use crate::error::{NclError, Result};
use crate::spike::SpikeTrain;

/// Bytes of the fixed record preceding every payload.
pub const ENTRY_HEADER_BYTES: usize = 16;

pub const FLAG_PADDED: u8 = 0b01;
pub const FLAG_SATURATED: u8 = 0b10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Codec {
    Bitpack,
    Ratechunk,
}

impl Codec {
    pub fn id(self) -> u8 {
        match self {
            Codec::Bitpack => 1,
            Codec::Ratechunk => 2,
        }
    }

    pub fn from_id(id: u8) -> Result<Codec> {
        match id {
            1 => Ok(Codec::Bitpack),
            2 => Ok(Codec::Ratechunk),
            other => Err(NclError::Codec(format!("unknown codec id {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Codec::Bitpack => "bitpack",
            Codec::Ratechunk => "ratechunk",
        }
    }

    /// Payload size for a `timesteps x width` train.
    pub fn payload_size(self, timesteps: usize, width: usize, chunk: usize) -> usize {
        match self {
            Codec::Bitpack => (timesteps * width).div_ceil(8),
            Codec::Ratechunk => timesteps.div_ceil(chunk.max(1)) * width,
        }
    }
}

impl std::str::FromStr for Codec {
    type Err = NclError;
    fn from_str(s: &str) -> Result<Codec> {
        match s {
            "bitpack" => Ok(Codec::Bitpack),
            "ratechunk" => Ok(Codec::Ratechunk),
            other => Err(NclError::Codec(format!("unknown codec '{other}'"))),
        }
    }
}

impl std::fmt::Display for Codec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One compressed replay sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatentActivations {
    pub codec: Codec,
    pub chunk: u16,
    pub timesteps: u32,
    pub width: u32,
    pub label: u32,
    pub flags: u8,
    pub payload: Vec<u8>,
    /// Per-neuron spike totals of the decompressed train.
    pub spike_counts: Vec<u32>,
}

impl LatentActivations {
    pub fn saturated(&self) -> bool {
        self.flags & FLAG_SATURATED != 0
    }

    pub fn padded(&self) -> bool {
        self.flags & FLAG_PADDED != 0
    }

    pub fn encoded_len(&self) -> usize {
        ENTRY_HEADER_BYTES + self.payload.len()
    }

    /// Header then payload.
    pub fn encode(&self, out: &mut Vec<u8>) {
        out.push(self.codec.id());
        out.push(self.flags);
        out.extend_from_slice(&self.chunk.to_le_bytes());
        out.extend_from_slice(&self.timesteps.to_le_bytes());
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.label.to_le_bytes());
        out.extend_from_slice(&self.payload);
    }

    /// Parses one entry starting at `bytes[offset]`; returns it and the next offset.
    pub fn decode(bytes: &[u8], offset: usize) -> Result<(LatentActivations, usize)> {
        let header = bytes
            .get(offset..offset + ENTRY_HEADER_BYTES)
            .ok_or_else(|| decode_err(offset, "truncated entry header"))?;
        let codec = Codec::from_id(header[0]).map_err(|_| decode_err(offset, "unknown codec id"))?;
        let flags = header[1];
        if flags & !(FLAG_PADDED | FLAG_SATURATED) != 0 {
            return Err(decode_err(offset + 1, "unknown flag bits"));
        }
        let chunk = u16::from_le_bytes([header[2], header[3]]);
        let le32 = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().expect("4 bytes"));
        let (timesteps, width, label) = (le32(4), le32(8), le32(12));
        if codec == Codec::Ratechunk && chunk == 0 {
            return Err(decode_err(offset + 2, "zero chunk length"));
        }
        let len = codec.payload_size(timesteps as usize, width as usize, chunk as usize);
        let start = offset + ENTRY_HEADER_BYTES;
        let payload = bytes
            .get(start..start + len)
            .ok_or_else(|| decode_err(start, "truncated payload"))?
            .to_vec();
        let mut entry = LatentActivations {
            codec,
            chunk,
            timesteps,
            width,
            label,
            flags,
            payload,
            spike_counts: Vec::new(),
        };
        entry.spike_counts = decompress_latent(&entry)
            .map_err(|_| decode_err(start, "payload inconsistent with header"))?
            .counts_per_neuron();
        Ok((entry, start + len))
    }
}

fn decode_err(offset: usize, message: &str) -> NclError {
    NclError::Decode {
        offset,
        message: message.to_string(),
    }
}

/// Compresses a train. `chunk` is the ratechunk window in timesteps; a final
/// partial window is flagged as padded.
pub fn compress_latent(train: &SpikeTrain, label: usize, codec: Codec, chunk: usize) -> Result<LatentActivations> {
    if chunk == 0 || chunk > u16::MAX as usize {
        return Err(NclError::Codec(format!("chunk length {chunk} outside 1..=65535")));
    }
    let (t_total, width) = (train.timesteps(), train.width());
    let mut flags = 0u8;
    if t_total % chunk != 0 {
        flags |= FLAG_PADDED;
    }
    let payload = match codec {
        Codec::Bitpack => {
            let mut bytes = vec![0u8; codec.payload_size(t_total, width, chunk)];
            for (k, &b) in train.as_slice().iter().enumerate() {
                bytes[k / 8] |= b << (k % 8);
            }
            bytes
        }
        Codec::Ratechunk => {
            let n_chunks = t_total.div_ceil(chunk);
            let mut counts = vec![0u32; n_chunks * width];
            for t in 0..t_total {
                let base = (t / chunk) * width;
                for n in train.active(t) {
                    counts[base + n] += 1;
                }
            }
            if counts.iter().any(|&c| c > 255) {
                flags |= FLAG_SATURATED;
            }
            counts.into_iter().map(|c| c.min(255) as u8).collect()
        }
    };
    let mut entry = LatentActivations {
        codec,
        chunk: chunk as u16,
        timesteps: t_total as u32,
        width: width as u32,
        label: label as u32,
        flags,
        payload,
        spike_counts: Vec::new(),
    };
    entry.spike_counts = match codec {
        Codec::Bitpack => train.counts_per_neuron(),
        Codec::Ratechunk => decompress_latent(&entry)?.counts_per_neuron(),
    };
    Ok(entry)
}

/// Rebuilds a spike train. For `ratechunk`, `k` spikes in a window of length `len`
/// land at offsets `floor(i * len / k)`, `i = 0..k`.
pub fn decompress_latent(a: &LatentActivations) -> Result<SpikeTrain> {
    let (t_total, width, chunk) = (a.timesteps as usize, a.width as usize, a.chunk as usize);
    let expected = a.codec.payload_size(t_total, width, chunk);
    if a.payload.len() != expected {
        return Err(NclError::Decode {
            offset: ENTRY_HEADER_BYTES,
            message: format!("payload has {} bytes, header implies {}", a.payload.len(), expected),
        });
    }
    let mut train = SpikeTrain::zeros(t_total, width);
    match a.codec {
        Codec::Bitpack => {
            for t in 0..t_total {
                for n in 0..width {
                    let k = t * width + n;
                    if a.payload[k / 8] >> (k % 8) & 1 == 1 {
                        train.set(t, n, true);
                    }
                }
            }
            let tail = t_total * width;
            if tail % 8 != 0 && a.payload[tail / 8] >> (tail % 8) != 0 {
                return Err(NclError::Decode {
                    offset: ENTRY_HEADER_BYTES + tail / 8,
                    message: "nonzero padding bits".into(),
                });
            }
        }
        Codec::Ratechunk => {
            if chunk == 0 {
                return Err(NclError::Decode {
                    offset: 2,
                    message: "zero chunk length".into(),
                });
            }
            for c in 0..t_total.div_ceil(chunk) {
                let start = c * chunk;
                let len = chunk.min(t_total - start);
                for n in 0..width {
                    let k = a.payload[c * width + n] as usize;
                    if k > len {
                        return Err(NclError::Decode {
                            offset: ENTRY_HEADER_BYTES + c * width + n,
                            message: format!("count {k} exceeds window length {len}"),
                        });
                    }
                    for i in 0..k {
                        train.set(start + i * len / k, n, true);
                    }
                }
            }
        }
    }
    Ok(train)
}
