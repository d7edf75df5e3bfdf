//! Checkpoint files: a 32-byte header followed by little-endian `f32`
//! parameters.
//!
//! | bytes  | field |
//! |--------|-------|
//! | 0..8   | magic `PIA3CNET` |
//! | 8..12  | format version (u32) |
//! | 12..16 | board size (u32) |
//! | 16..24 | shape hash (u64) |
//! | 24..32 | parameter count (u64) |

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{NetParams, NetShape};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PIA3CNET";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("architecture mismatch: file hash {found:#018x}, expected {expected:#018x}")]
    ShapeMismatch { expected: u64, found: u64 },
    #[error("parameter count {found} does not match architecture ({expected})")]
    CountMismatch { expected: u64, found: u64 },
    #[error("trailing bytes after parameters")]
    Trailing,
    #[error("checkpoint contains non-finite parameters")]
    NonFinite,
}

pub fn write_checkpoint<W: Write>(mut w: W, params: &NetParams<f32>) -> io::Result<()> {
    let shape = params.shape();
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(shape.board_size as u32).to_le_bytes())?;
    w.write_all(&shape.hash().to_le_bytes())?;
    w.write_all(&(params.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(params.len() * 4);
    for v in params.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()
}

/// Reads a checkpoint. When `expected` is given, the stored architecture must
/// match it.
pub fn read_checkpoint<R: Read>(mut r: R, expected: Option<NetShape>) -> Result<NetParams<f32>, CheckpointError> {
    let mut header = [0u8; 32];
    r.read_exact(&mut header)?;
    if &header[0..8] != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let word = |a: usize| u32::from_le_bytes(header[a..a + 4].try_into().unwrap());
    let quad = |a: usize| u64::from_le_bytes(header[a..a + 8].try_into().unwrap());
    let version = word(8);
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version(version));
    }
    let shape = NetShape::new(word(12) as usize);
    let found = quad(16);
    let want = expected.unwrap_or(shape).hash();
    if found != want || shape.hash() != want {
        return Err(CheckpointError::ShapeMismatch { expected: want, found });
    }
    let count = quad(24);
    if count != shape.param_count() as u64 {
        return Err(CheckpointError::CountMismatch { expected: shape.param_count() as u64, found: count });
    }
    let mut bytes = vec![0u8; count as usize * 4];
    r.read_exact(&mut bytes)?;
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(CheckpointError::Trailing);
    }
    let flat: Vec<f32> = bytes.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(CheckpointError::NonFinite);
    }
    Ok(NetParams::from_flat(shape, flat).expect("count checked"))
}

pub fn save_checkpoint(path: &Path, params: &NetParams<f32>) -> io::Result<()> {
    write_checkpoint(BufWriter::new(File::create(path)?), params)
}

pub fn load_checkpoint(path: &Path, expected: Option<NetShape>) -> Result<NetParams<f32>, CheckpointError> {
    read_checkpoint(BufReader::new(File::open(path)?), expected)
}
