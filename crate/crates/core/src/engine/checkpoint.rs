//! Binary training checkpoints.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic        8 bytes   "CRITPCKP"
//! version      u32       1
//! spec hash    u64       ModelSpec::fingerprint
//! epoch        u64       completed epochs; training resumes at this epoch
//! seeds        3 x u64   init, data, augment
//! opt step     u64       optimizer step counter
//! params       u64 count, then count x f32
//! buffers      u32 count, then per buffer: u64 len, len x f32
//! ```
//!
//! Every data and augmentation stream is derived from the seeds and the
//! epoch index, so the seeds are the full RNG state.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::optim::OptimizerState;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CRITPCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub init: u64,
    pub data: u64,
    pub augment: u64,
}

impl Default for RunSeeds {
    fn default() -> Self {
        RunSeeds {
            init: 0,
            data: 1,
            augment: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub spec_fingerprint: u64,
    pub epoch: u64,
    pub seeds: RunSeeds,
    pub params: Vec<f32>,
    pub optimizer: OptimizerState<f32>,
}

impl Checkpoint {
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        for v in [
            self.spec_fingerprint,
            self.epoch,
            self.seeds.init,
            self.seeds.data,
            self.seeds.augment,
            self.optimizer.step,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        write_f32s(&mut w, &self.params)?;
        w.write_all(&(self.optimizer.buffers.len() as u32).to_le_bytes())?;
        for buf in &self.optimizer.buffers {
            write_f32s(&mut w, buf)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint(format!("bad magic {magic:?}")));
        }
        let version = read_u32(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version}"
            )));
        }
        let spec_fingerprint = read_u64(&mut r)?;
        let epoch = read_u64(&mut r)?;
        let seeds = RunSeeds {
            init: read_u64(&mut r)?,
            data: read_u64(&mut r)?,
            augment: read_u64(&mut r)?,
        };
        let step = read_u64(&mut r)?;
        let params = read_f32s(&mut r)?;
        let count = read_u32(&mut r)? as usize;
        if count > 8 {
            return Err(Error::Checkpoint(format!("{count} optimizer buffers")));
        }
        let buffers = (0..count)
            .map(|_| read_f32s(&mut r))
            .collect::<Result<Vec<_>>>()?;
        if buffers.iter().any(|b| b.len() != params.len()) {
            return Err(Error::Checkpoint(
                "optimizer buffer length differs from parameter count".into(),
            ));
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing).map_err(|e| Error::Checkpoint(e.to_string()))? != 0 {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Checkpoint {
            spec_fingerprint,
            epoch,
            seeds,
            params,
            optimizer: OptimizerState { step, buffers },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        // Write-then-rename so a crash never leaves a torn checkpoint.
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_bytes()).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(bytes.as_slice())
    }
}

fn write_f32s(w: &mut impl Write, values: &[f32]) -> std::io::Result<()> {
    w.write_all(&(values.len() as u64).to_le_bytes())?;
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f32s(r: &mut impl Read) -> Result<Vec<f32>> {
    let len = read_u64(r)? as usize;
    let mut bytes = Vec::new();
    r.take(len as u64 * 4)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    if bytes.len() != len * 4 {
        return Err(Error::Checkpoint("truncated buffer".into()));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
