//! Checkpoint file layout, all integers and floats little-endian:
//!
//! ```text
//! magic   b"GMNC"
//! u32     version (1)
//! u32     actions, channels, hidden
//! f64     dropout
//! u64     training step
//! u32     improvement iteration
//! u64     seed
//! u8      color role (0 none, 1 white, 2 black)
//! u8      phase (0 init, 1 rl, 2 pretrain)
//! f64     opponent epsilon
//! u32+[u8] opponent reference (utf-8)
//! u32     tensor count, then per tensor: u64 length + f32 values
//! u32     buffer count, then per buffer: u64 length + f32 values
//! u32     crc32 of every preceding byte
//! ```

use std::fs;
use std::path::Path;

use crate::engine::Color;
use crate::error::CheckpointError;

use super::{NetConfig, Network, ParamSet, NUM_BN, NUM_TENSORS};

const MAGIC: &[u8; 4] = b"GMNC";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Phase {
    #[default]
    Init,
    Rl,
    Pretrain,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Init => "init",
            Phase::Rl => "rl",
            Phase::Pretrain => "pretrain",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CheckpointMeta {
    pub step: u64,
    pub iteration: u32,
    pub seed: u64,
    pub color: Option<Color>,
    pub phase: Phase,
    pub epsilon: f64,
    /// Path or id of the opponent this checkpoint was trained against.
    pub opponent: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub net: Network<f32>,
}

impl Checkpoint {
    pub fn new(net: Network<f32>, meta: CheckpointMeta) -> Self {
        Checkpoint { meta, net }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let cfg = &self.net.config;
        let mut out = Vec::with_capacity(64 + 4 * self.net.params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for v in [cfg.actions, cfg.channels, cfg.hidden] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.extend_from_slice(&cfg.dropout.to_le_bytes());
        let m = &self.meta;
        out.extend_from_slice(&m.step.to_le_bytes());
        out.extend_from_slice(&m.iteration.to_le_bytes());
        out.extend_from_slice(&m.seed.to_le_bytes());
        out.push(match m.color {
            None => 0,
            Some(Color::White) => 1,
            Some(Color::Black) => 2,
        });
        out.push(match m.phase {
            Phase::Init => 0,
            Phase::Rl => 1,
            Phase::Pretrain => 2,
        });
        out.extend_from_slice(&m.epsilon.to_le_bytes());
        out.extend_from_slice(&(m.opponent.len() as u32).to_le_bytes());
        out.extend_from_slice(m.opponent.as_bytes());
        for group in [&self.net.params.tensors, &self.net.buffers] {
            out.extend_from_slice(&(group.len() as u32).to_le_bytes());
            for t in group.iter() {
                out.extend_from_slice(&(t.len() as u64).to_le_bytes());
                for v in t {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    /// Parses a checkpoint; with `expected`, shape constants must match it.
    pub fn from_bytes(bytes: &[u8], expected: Option<&NetConfig>) -> Result<Self, CheckpointError> {
        if bytes.len() < 8 {
            return Err(CheckpointError::Corrupt("file too short".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        if crc32fast::hash(body) != stored {
            return Err(CheckpointError::Corrupt("checksum mismatch".into()));
        }
        let mut r = Reader { buf: body, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(CheckpointError::Corrupt("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(CheckpointError::Corrupt(format!("unsupported version {version}")));
        }
        let actions = r.u32()? as usize;
        let channels = r.u32()? as usize;
        let hidden = r.u32()? as usize;
        let dropout = r.f64()?;
        if let Some(exp) = expected {
            for (field, found, want) in [
                ("actions", actions, exp.actions),
                ("channels", channels, exp.channels),
                ("hidden", hidden, exp.hidden),
            ] {
                if found != want {
                    return Err(CheckpointError::ShapeMismatch {
                        field,
                        found: found as u64,
                        expected: want as u64,
                    });
                }
            }
        }
        let config = NetConfig {
            channels,
            hidden,
            actions,
            dropout,
        };
        let step = r.u64()?;
        let iteration = r.u32()?;
        let seed = r.u64()?;
        let color = match r.u8()? {
            0 => None,
            1 => Some(Color::White),
            2 => Some(Color::Black),
            x => return Err(CheckpointError::Corrupt(format!("bad color tag {x}"))),
        };
        let phase = match r.u8()? {
            0 => Phase::Init,
            1 => Phase::Rl,
            2 => Phase::Pretrain,
            x => return Err(CheckpointError::Corrupt(format!("bad phase tag {x}"))),
        };
        let epsilon = r.f64()?;
        let olen = r.u32()? as usize;
        let opponent = String::from_utf8(r.take(olen)?.to_vec())
            .map_err(|_| CheckpointError::Corrupt("opponent is not utf-8".into()))?;

        let shapes = config.tensor_shapes();
        let tensors = r.group(NUM_TENSORS, |i| shapes[i].1.iter().product())?;
        let widths = config.bn_widths();
        let buffers = r.group(2 * NUM_BN, |i| widths[i / 2])?;
        if r.pos != body.len() {
            return Err(CheckpointError::Corrupt("trailing bytes".into()));
        }
        Ok(Checkpoint {
            meta: CheckpointMeta {
                step,
                iteration,
                seed,
                color,
                phase,
                epsilon,
                opponent,
            },
            net: Network {
                config,
                params: ParamSet { tensors },
                buffers,
            },
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        let path = path.as_ref();
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, expected: Option<&NetConfig>) -> Result<Self, CheckpointError> {
        let bytes = fs::read(path)?;
        Checkpoint::from_bytes(&bytes, expected)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.buf.len() - self.pos < n {
            return Err(CheckpointError::Corrupt("unexpected end of file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn group(
        &mut self,
        count: usize,
        expected_len: impl Fn(usize) -> usize,
    ) -> Result<Vec<Vec<f32>>, CheckpointError> {
        let n = self.u32()? as usize;
        if n != count {
            return Err(CheckpointError::Corrupt(format!("expected {count} arrays, found {n}")));
        }
        (0..n)
            .map(|i| {
                let len = self.u64()? as usize;
                if len != expected_len(i) {
                    return Err(CheckpointError::Corrupt(format!(
                        "array {i} has length {len}, expected {}",
                        expected_len(i)
                    )));
                }
                let raw = self.take(len * 4)?;
                Ok(raw
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect())
            })
            .collect()
    }
}
