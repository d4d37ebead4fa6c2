//! Spherical-signal container.
//!
//! ```text
//! magic "S2SG" | u32 version | u32 bandwidth | u32 channels
//! channels × (2B)² × f32, channel-major then row-major
//! ```
//!
//! All fields little-endian.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::SphericalGrid;
use crate::sht::SphericalSignal;

pub const SIGNAL_MAGIC: [u8; 4] = *b"S2SG";
pub const SIGNAL_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

/// Serializes with samples rounded to `f32`.
pub fn write_signal(signal: &SphericalSignal) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * signal.values().len());
    out.extend_from_slice(&SIGNAL_MAGIC);
    out.extend_from_slice(&SIGNAL_VERSION.to_le_bytes());
    out.extend_from_slice(&(signal.bandwidth() as u32).to_le_bytes());
    out.extend_from_slice(&(signal.channels() as u32).to_le_bytes());
    for &v in signal.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn read_signal(bytes: &[u8]) -> Result<SphericalSignal> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated(format!(
            "signal header needs {HEADER_LEN} bytes, file has {}",
            bytes.len()
        )));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap());
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != SIGNAL_MAGIC {
        return Err(Error::BadMagic {
            expected: SIGNAL_MAGIC,
            found: magic,
        });
    }
    if word(1) != SIGNAL_VERSION {
        return Err(Error::UnsupportedVersion(word(1)));
    }
    let (b, k) = (word(2) as usize, word(3) as usize);
    let grid = SphericalGrid::shared(b)?;
    let n = grid.resolution();
    let expected = k
        .checked_mul(n * n)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| Error::Truncated(format!("{k} channels at bandwidth {b} is implausible")))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(Error::Truncated(format!(
            "{k}×{n}×{n} samples need {expected} bytes, found {}",
            payload.len()
        )));
    }
    if payload.len() > expected {
        return Err(Error::ShapeMismatch(format!(
            "{} trailing bytes after {k}×{n}×{n} samples",
            payload.len() - expected
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    SphericalSignal::new(grid, k, values)
}

pub fn save_signal(signal: &SphericalSignal, path: &Path) -> Result<()> {
    fs::write(path, write_signal(signal))?;
    Ok(())
}

pub fn load_signal(path: &Path) -> Result<SphericalSignal> {
    read_signal(&fs::read(path)?)
}
