//! Versioned binary snapshot of a training run.
//!
//! ```text
//! "NCK1" | version u32 | depth u32 | input_width u32
//! per layer: width u32 | flags u8 (bit0 frozen, bit1 recurrent) | 3 zero bytes
//!            v_thr v_rst beta surrogate_slope (f64) | w (in x out f64) | v (out x out f64)
//! optimizer: kind u8 (1 sgd, 2 adam) | has_moments u8 | 2 zero bytes
//!            eta beta1 beta2 epsilon (f64) | [step u64 | m.dw m.dv v.dw v.dv per layer]
//! rng: seed [u8; 32] | stream u64 | word_pos u128
//! ```
//!
//! Everything little-endian, so a checkpoint is byte-identical across runs and platforms.

use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

use crate::error::{NclError, Result};
use crate::lif::{LifLayer, LifParams};
use crate::matrix::Matrix;
use crate::network::NetworkTopology;
use crate::training::bptt::GradientSet;
use crate::training::optim::{AdamState, Optimizer, OptimizerConfig, OptimizerKind};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"NCK1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub net: NetworkTopology,
    pub optimizer: Optimizer,
    pub rng: ChaCha8Rng,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn matrix(&mut self, m: &Matrix) {
        m.as_slice().iter().for_each(|&x| self.f64(x));
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let s = self.bytes.get(self.pos..self.pos + n).ok_or_else(|| NclError::Decode {
            offset: self.pos,
            message: "truncated checkpoint".into(),
        })?;
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8")))
    }
    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        let data = (0..rows * cols).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Ok(Matrix::from_vec(rows, cols, data).expect("shape"))
    }
    fn err(&self, message: &str) -> NclError {
        NclError::Decode {
            offset: self.pos,
            message: message.into(),
        }
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION);
        w.u32(self.net.depth() as u32);
        w.u32(self.net.input_width() as u32);
        for l in &self.net.layers {
            w.u32(l.out_width() as u32);
            w.u8(l.frozen as u8 | (l.recurrent as u8) << 1);
            w.0.extend_from_slice(&[0; 3]);
            let p = l.params;
            [p.v_thr, p.v_rst, p.beta, p.surrogate_slope].iter().for_each(|&x| w.f64(x));
            w.matrix(&l.w);
            w.matrix(&l.v);
        }
        let c = self.optimizer.config;
        w.u8(match c.kind {
            OptimizerKind::Sgd => 1,
            OptimizerKind::Adam => 2,
        });
        w.u8(self.optimizer.adam.is_some() as u8);
        w.0.extend_from_slice(&[0; 2]);
        [c.eta, c.beta1, c.beta2, c.epsilon].iter().for_each(|&x| w.f64(x));
        if let Some(a) = &self.optimizer.adam {
            w.u64(a.step);
            for g in [&a.m, &a.v] {
                g.dw.iter().for_each(|m| w.matrix(m));
                g.dv.iter().for_each(|m| w.matrix(m));
            }
        }
        w.0.extend_from_slice(&self.rng.get_seed());
        w.u64(self.rng.get_stream());
        w.0.extend_from_slice(&self.rng.get_word_pos().to_le_bytes());
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(NclError::Decode {
                offset: 0,
                message: "bad checkpoint magic".into(),
            });
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(r.err(&format!("unsupported checkpoint version {version}")));
        }
        let depth = r.u32()? as usize;
        let mut prev = r.u32()? as usize;
        let mut layers = Vec::with_capacity(depth.min(1024));
        for _ in 0..depth {
            let width = r.u32()? as usize;
            let flags = r.u8()?;
            r.take(3)?;
            let params = LifParams {
                v_thr: r.f64()?,
                v_rst: r.f64()?,
                beta: r.f64()?,
                surrogate_slope: r.f64()?,
            };
            let w = r.matrix(prev, width)?;
            let v = r.matrix(width, width)?;
            let mut layer = LifLayer::new(w, v, params, flags & 2 != 0).map_err(|e| r.err(&e.to_string()))?;
            layer.frozen = flags & 1 != 0;
            layers.push(layer);
            prev = width;
        }
        let net = NetworkTopology::new(layers).map_err(|e| r.err(&e.to_string()))?;
        let kind = match r.u8()? {
            1 => OptimizerKind::Sgd,
            2 => OptimizerKind::Adam,
            _ => return Err(r.err("unknown optimizer kind")),
        };
        let has_moments = r.u8()? != 0;
        r.take(2)?;
        let config = OptimizerConfig {
            kind,
            eta: r.f64()?,
            beta1: r.f64()?,
            beta2: r.f64()?,
            epsilon: r.f64()?,
        };
        let adam = if has_moments {
            let step = r.u64()?;
            let read_set = |r: &mut Reader| -> Result<GradientSet> {
                let dw = net.layers.iter().map(|l| r.matrix(l.w.rows(), l.w.cols())).collect::<Result<_>>()?;
                let dv = net.layers.iter().map(|l| r.matrix(l.v.rows(), l.v.cols())).collect::<Result<_>>()?;
                Ok(GradientSet { dw, dv })
            };
            let m = read_set(&mut r)?;
            let v = read_set(&mut r)?;
            Some(AdamState { step, m, v })
        } else {
            None
        };
        let seed: [u8; 32] = r.take(32)?.try_into().expect("32");
        let stream = r.u64()?;
        let word_pos = u128::from_le_bytes(r.take(16)?.try_into().expect("16"));
        if r.pos != bytes.len() {
            return Err(r.err("trailing bytes"));
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(stream);
        rng.set_word_pos(word_pos);
        Ok(Checkpoint {
            net,
            optimizer: Optimizer { config, adam },
            rng,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
        Checkpoint::from_bytes(&std::fs::read(path)?)
    }
}
