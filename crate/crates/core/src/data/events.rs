//! Event samples and the EVT1 file format.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "EVT1" | channels u32 | classes u32 | samples u32
//! per sample: label u32 | events u32 | events × (time f32 seconds, channel u32)
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{NclError, ParseErrorKind, Result};

pub const EVT_MAGIC: &[u8; 4] = b"EVT1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f32,
    pub channel: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventSample {
    /// Sorted by time.
    pub events: Vec<Event>,
    pub label: usize,
    /// Window length in seconds; every event time lies in `[0, duration)`.
    pub duration: f32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synthetic,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub channels: usize,
    pub classes: usize,
    pub samples: usize,
    pub source: DataSource,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub samples: Vec<EventSample>,
}

/// Sample window assumed for EVT1 files, which store no duration.
pub const DEFAULT_DURATION: f32 = 1.0;

impl Dataset {
    pub fn channels(&self) -> usize {
        self.manifest.channels
    }

    pub fn classes(&self) -> usize {
        self.manifest.classes
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Serialises to EVT1 bytes.
    pub fn to_evt_bytes(&self) -> Vec<u8> {
        let events: usize = self.samples.iter().map(|s| s.events.len()).sum();
        let mut out = Vec::with_capacity(16 + self.samples.len() * 8 + events * 8);
        out.extend_from_slice(EVT_MAGIC);
        out.extend_from_slice(&(self.manifest.channels as u32).to_le_bytes());
        out.extend_from_slice(&(self.manifest.classes as u32).to_le_bytes());
        out.extend_from_slice(&(self.samples.len() as u32).to_le_bytes());
        for s in &self.samples {
            out.extend_from_slice(&(s.label as u32).to_le_bytes());
            out.extend_from_slice(&(s.events.len() as u32).to_le_bytes());
            for e in &s.events {
                out.extend_from_slice(&e.time.to_le_bytes());
                out.extend_from_slice(&e.channel.to_le_bytes());
            }
        }
        out
    }

    /// SHA-256 of the EVT1 encoding, hex.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.to_evt_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Parses EVT1 bytes; sample durations are set to [`DEFAULT_DURATION`].
    pub fn from_evt_bytes(bytes: &[u8]) -> Result<Dataset> {
        let mut r = Reader { bytes, pos: 0 };
        if bytes.len() < 4 || &bytes[..4] != EVT_MAGIC {
            return Err(parse_err(0, ParseErrorKind::BadMagic));
        }
        r.pos = 4;
        let channels = r.u32()?;
        let classes = r.u32()?;
        let count = r.u32()?;
        let mut samples = Vec::with_capacity((count as usize).min(1 << 20));
        for _ in 0..count {
            let label_at = r.pos;
            let label = r.u32()?;
            if label >= classes {
                return Err(parse_err(label_at, ParseErrorKind::LabelOverflow { label, classes }));
            }
            let n = r.u32()? as usize;
            let mut events = Vec::with_capacity(n.min(1 << 20));
            let mut last = f32::NEG_INFINITY;
            for _ in 0..n {
                let at = r.pos;
                let time = f32::from_le_bytes(r.take4()?);
                if !(time.is_finite() && time >= 0.0 && time < DEFAULT_DURATION) {
                    return Err(parse_err(at, ParseErrorKind::BadTime));
                }
                if time < last {
                    return Err(parse_err(at, ParseErrorKind::UnsortedTimes));
                }
                last = time;
                let ch_at = r.pos;
                let channel = r.u32()?;
                if channel >= channels {
                    return Err(parse_err(ch_at, ParseErrorKind::ChannelOverflow { channel, channels }));
                }
                events.push(Event { time, channel });
            }
            samples.push(EventSample {
                events,
                label: label as usize,
                duration: DEFAULT_DURATION,
            });
        }
        if r.pos != bytes.len() {
            return Err(parse_err(r.pos, ParseErrorKind::TrailingBytes));
        }
        Ok(Dataset {
            manifest: DatasetManifest {
                channels: channels as usize,
                classes: classes as usize,
                samples: samples.len(),
                source: DataSource::File,
                seed: None,
            },
            samples,
        })
    }
}

fn parse_err(offset: usize, kind: ParseErrorKind) -> NclError {
    NclError::Parse { offset, kind }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take4(&mut self) -> Result<[u8; 4]> {
        let end = self.pos + 4;
        let chunk = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| parse_err(self.pos, ParseErrorKind::Truncated))?;
        self.pos = end;
        Ok(chunk.try_into().expect("4 bytes"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take4()?))
    }
}

pub fn write_events(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    std::fs::write(path, data.to_evt_bytes())?;
    Ok(())
}

pub fn load_events(path: impl AsRef<Path>) -> Result<Dataset> {
    Dataset::from_evt_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(channels: u32, classes: u32, samples: u32) -> Vec<u8> {
        let mut b = EVT_MAGIC.to_vec();
        for v in [channels, classes, samples] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b
    }

    #[test]
    fn empty_sample() {
        let mut b = header(4, 2, 1);
        b.extend_from_slice(&1u32.to_le_bytes());
        b.extend_from_slice(&0u32.to_le_bytes());
        let d = Dataset::from_evt_bytes(&b).unwrap();
        assert_eq!(d.len(), 1);
        assert!(d.samples[0].events.is_empty());
        assert_eq!(d.samples[0].label, 1);
    }

    #[test]
    fn hand_built_two_events() {
        let mut b = header(8, 3, 1);
        b.extend_from_slice(&2u32.to_le_bytes());
        b.extend_from_slice(&2u32.to_le_bytes());
        b.extend_from_slice(&0.25f32.to_le_bytes());
        b.extend_from_slice(&5u32.to_le_bytes());
        b.extend_from_slice(&0.5f32.to_le_bytes());
        b.extend_from_slice(&7u32.to_le_bytes());
        let d = Dataset::from_evt_bytes(&b).unwrap();
        assert_eq!(
            d.samples[0].events,
            vec![
                Event { time: 0.25, channel: 5 },
                Event { time: 0.5, channel: 7 }
            ]
        );
        assert_eq!(d.to_evt_bytes(), b);
    }

    #[test]
    fn bad_magic_at_zero() {
        let mut b = header(1, 1, 0);
        b[0] = b'X';
        assert!(matches!(
            Dataset::from_evt_bytes(&b),
            Err(NclError::Parse { offset: 0, kind: ParseErrorKind::BadMagic })
        ));
    }

    #[test]
    fn structural_errors_report_offsets() {
        let mut b = header(4, 2, 1);
        b.extend_from_slice(&0u32.to_le_bytes());
        b.extend_from_slice(&2u32.to_le_bytes());
        b.extend_from_slice(&0.5f32.to_le_bytes());
        b.extend_from_slice(&1u32.to_le_bytes());
        let mut unsorted = b.clone();
        unsorted.extend_from_slice(&0.25f32.to_le_bytes());
        unsorted.extend_from_slice(&1u32.to_le_bytes());
        assert!(matches!(
            Dataset::from_evt_bytes(&unsorted),
            Err(NclError::Parse { offset: 32, kind: ParseErrorKind::UnsortedTimes })
        ));

        let mut overflow = b.clone();
        overflow.extend_from_slice(&0.75f32.to_le_bytes());
        overflow.extend_from_slice(&4u32.to_le_bytes());
        assert!(matches!(
            Dataset::from_evt_bytes(&overflow),
            Err(NclError::Parse { offset: 36, kind: ParseErrorKind::ChannelOverflow { .. } })
        ));

        assert!(matches!(
            Dataset::from_evt_bytes(&b),
            Err(NclError::Parse { offset: 32, kind: ParseErrorKind::Truncated })
        ));
    }
}
