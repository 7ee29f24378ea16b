//! `NCCK` checkpoints.
//!
//! ```text
//! "NCCK" | version u32 | config hash [32] | iteration u64
//!        | t_max u64 | base_lr f64 | momentum f64 | schedule u8
//!        | layer count u32 | per layer: weights, bias
//!        | per layer: weight velocity, bias velocity
//!        | SHA-256 of everything above [32]
//! tensor = rows u32 | cols u32 | rows·cols f32
//! ```
//! Little-endian throughout.

use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{write_atomic, HarnessError};
use crate::network::{Layer, LrSchedule, MlpArchitecture, NetworkParams, OptimizerState, Snapshot};
use crate::numerics::Matrix;

pub const NCCK_MAGIC: &[u8; 4] = b"NCCK";
pub const NCCK_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckpointError {
    #[error("not a checkpoint (magic {0:02x?})")]
    BadMagic(Vec<u8>),
    #[error("checkpoint format version {found}, this build reads version {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint was written by config {found}, expected {expected}")]
    HashMismatch { found: String, expected: String },
    #[error("checkpoint does not fit the architecture: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub iteration: u64,
    pub params: NetworkParams<f32>,
    pub optimizer: OptimizerState<f32>,
    pub config_hash: [u8; 32],
}

impl Checkpoint {
    pub fn from_snapshot(s: &Snapshot, config_hash: [u8; 32]) -> Self {
        Self {
            iteration: s.iteration,
            params: s.params.clone(),
            optimizer: s.optimizer.clone(),
            config_hash,
        }
    }

    pub fn check_arch(&self, arch: &MlpArchitecture) -> Result<(), CheckpointError> {
        self.params
            .check_arch(arch)
            .map_err(|e| CheckpointError::Shape(e.to_string()))
    }
}

fn put_tensor(out: &mut Vec<u8>, m: &Matrix<f32>) {
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn put_params(out: &mut Vec<u8>, p: &NetworkParams<f32>) {
    for l in &p.layers {
        put_tensor(out, &l.weights);
        put_tensor(out, &l.bias);
    }
}

pub fn encode_checkpoint(c: &Checkpoint) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(NCCK_MAGIC);
    out.extend_from_slice(&NCCK_VERSION.to_le_bytes());
    out.extend_from_slice(&c.config_hash);
    out.extend_from_slice(&c.iteration.to_le_bytes());
    let o = &c.optimizer;
    out.extend_from_slice(&o.t_max.to_le_bytes());
    out.extend_from_slice(&o.base_lr.to_le_bytes());
    out.extend_from_slice(&o.momentum.to_le_bytes());
    out.push(match o.schedule {
        LrSchedule::Cosine => 0,
        LrSchedule::Constant => 1,
    });
    out.extend_from_slice(&(c.params.layers.len() as u32).to_le_bytes());
    put_params(&mut out, &c.params);
    put_params(&mut out, &o.velocity);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            CheckpointError::Corrupt(format!(
                "truncated: needed {n} bytes at offset {}, {} left",
                self.pos,
                self.bytes.len() - self.pos
            ))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
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

    fn tensor(&mut self) -> Result<Matrix<f32>, CheckpointError> {
        let (r, c) = (self.u32()? as usize, self.u32()? as usize);
        let n = r
            .checked_mul(c)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| CheckpointError::Corrupt(format!("tensor shape {r}x{c} overflows")))?;
        let data = self
            .take(n)?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Matrix::from_vec(r, c, data).map_err(|e| CheckpointError::Corrupt(e.to_string()))
    }

    fn params(&mut self, layers: usize) -> Result<NetworkParams<f32>, CheckpointError> {
        let mut out = Vec::with_capacity(layers.min(1024));
        for _ in 0..layers {
            let weights = self.tensor()?;
            let bias = self.tensor()?;
            if bias.shape() != (1, weights.cols()) {
                return Err(CheckpointError::Corrupt(format!(
                    "bias {:?} does not match weights {:?}",
                    bias.shape(),
                    weights.shape()
                )));
            }
            out.push(Layer { weights, bias });
        }
        let p = NetworkParams { layers: out };
        if p.layers.windows(2).any(|w| w[0].weights.cols() != w[1].weights.rows()) {
            return Err(CheckpointError::Corrupt("layer shapes do not chain".into()));
        }
        Ok(p)
    }
}

/// Decodes and verifies a checkpoint. With `expected_hash`, a checkpoint from
/// another config is rejected.
pub fn decode_checkpoint(bytes: &[u8], expected_hash: Option<&[u8; 32]>) -> Result<Checkpoint, CheckpointError> {
    if bytes.len() < 4 || &bytes[..4] != NCCK_MAGIC {
        return Err(CheckpointError::BadMagic(bytes[..bytes.len().min(4)].to_vec()));
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32()?;
    if version != NCCK_VERSION {
        return Err(CheckpointError::VersionMismatch {
            found: version,
            expected: NCCK_VERSION,
        });
    }
    if bytes.len() < 8 + 32 {
        return Err(CheckpointError::Corrupt("truncated header".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(CheckpointError::Corrupt("content digest does not match".into()));
    }
    let mut r = Reader { bytes: body, pos: 8 };
    let config_hash: [u8; 32] = r.take(32)?.try_into().unwrap();
    if let Some(expected) = expected_hash {
        if &config_hash != expected {
            return Err(CheckpointError::HashMismatch {
                found: super::hex(&config_hash),
                expected: super::hex(expected),
            });
        }
    }
    let iteration = r.u64()?;
    let t_max = r.u64()?;
    let base_lr = r.f64()?;
    let momentum = r.f64()?;
    let schedule = match r.take(1)?[0] {
        0 => LrSchedule::Cosine,
        1 => LrSchedule::Constant,
        s => return Err(CheckpointError::Corrupt(format!("unknown schedule tag {s}"))),
    };
    let layers = r.u32()? as usize;
    let params = r.params(layers)?;
    let velocity = r.params(layers)?;
    if !params.same_shape(&velocity) {
        return Err(CheckpointError::Corrupt("momentum buffers differ in shape from parameters".into()));
    }
    if r.pos != body.len() {
        return Err(CheckpointError::Corrupt(format!("{} trailing bytes", body.len() - r.pos)));
    }
    Ok(Checkpoint {
        iteration,
        params,
        optimizer: OptimizerState {
            velocity,
            momentum,
            base_lr,
            schedule,
            t: iteration,
            t_max,
        },
        config_hash,
    })
}

pub fn save_checkpoint(c: &Checkpoint, path: &Path) -> Result<(), HarnessError> {
    write_atomic(path, &encode_checkpoint(c))
}

pub fn load_checkpoint(path: &Path, expected_hash: Option<&[u8; 32]>) -> Result<Checkpoint, HarnessError> {
    let bytes = std::fs::read(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(decode_checkpoint(&bytes, expected_hash)?)
}

/// File name of the checkpoint at iteration `t`.
pub fn checkpoint_name(t: u64) -> String {
    format!("iter_{t:08}.ncck")
}
