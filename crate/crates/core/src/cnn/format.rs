//! Binary weight container.
//!
//! All integers little-endian:
//!
//! ```text
//! magic "S2CW" | u32 version | u32 input_resolution | u32 input_channels
//! u32 n_layers, then per layer:
//!   u32 kind | u32 in_ch | u32 out_ch | u32 in_res | u32 out_res | u32 mid
//!   u32 n_tensors, then per tensor:
//!     u32 rank | rank × u32 dims | u64 offset | u64 len
//! u32 n_taps, then per tap: u32 name_len | name (UTF-8) | u32 layer
//! u64 data_len | data_len × f32
//! ```
//!
//! Tensor offsets and lengths count `f32` elements from the start of the
//! data block; tensors are row-major.

use std::fs;
use std::path::Path;

use super::{Layer, LayerKind, LayerSpec, NetworkWeights, Tap, Tensor};
use crate::error::{invalid_input, Error, Result};

pub const MAGIC: [u8; 4] = *b"S2CW";
pub const VERSION: u32 = 1;

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let Some(end) = end else {
            return Err(Error::Truncated(format!(
                "{what} needs {n} bytes at offset {}, file has {}",
                self.pos,
                self.buf.len()
            )));
        };
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        Ok(self.u32(what)? as usize)
    }
}

struct TensorEntry {
    dims: Vec<usize>,
    offset: u64,
    len: u64,
}

pub fn read_weights(bytes: &[u8]) -> Result<NetworkWeights> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4, "magic")?.try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic {
            expected: MAGIC,
            found: magic,
        });
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let input_resolution = r.usize("input resolution")?;
    let input_channels = r.usize("input channels")?;
    let n_layers = r.usize("layer count")?;

    let mut table = Vec::new();
    for idx in 0..n_layers {
        let code = r.u32("layer kind")?;
        let kind = LayerKind::from_code(code)
            .ok_or_else(|| invalid_input(format!("layer {idx} has unknown kind {code}")))?;
        let spec = LayerSpec {
            kind,
            in_channels: r.usize("layer table")?,
            out_channels: r.usize("layer table")?,
            in_resolution: r.usize("layer table")?,
            out_resolution: r.usize("layer table")?,
            mid_channels: r.usize("layer table")?,
        };
        let n_tensors = r.usize("tensor count")?;
        let mut entries = Vec::new();
        for _ in 0..n_tensors {
            let rank = r.usize("tensor rank")?;
            let dims = (0..rank)
                .map(|_| r.usize("tensor dims"))
                .collect::<Result<Vec<_>>>()?;
            let offset = r.u64("tensor offset")?;
            let len = r.u64("tensor length")?;
            let count = dims
                .iter()
                .try_fold(1u64, |acc, &d| acc.checked_mul(d as u64));
            if count != Some(len) {
                return Err(Error::ShapeMismatch(format!(
                    "layer {idx} tensor {dims:?} declares {len} values"
                )));
            }
            entries.push(TensorEntry { dims, offset, len });
        }
        table.push((spec, entries));
    }

    let n_taps = r.usize("tap count")?;
    let mut taps = Vec::with_capacity(n_taps.min(64));
    for _ in 0..n_taps {
        let len = r.usize("tap name length")?;
        let name = std::str::from_utf8(r.take(len, "tap name")?)
            .map_err(|_| invalid_input("tap name is not UTF-8"))?
            .to_string();
        let layer = r.usize("tap layer")?;
        taps.push(Tap { name, layer });
    }

    let data_len = r.u64("data length")?;
    let data_bytes = data_len
        .checked_mul(4)
        .and_then(|b| usize::try_from(b).ok())
        .ok_or_else(|| Error::Truncated(format!("data length {data_len} is implausible")))?;
    let data = r.take(data_bytes, "tensor data")?;

    let mut layers = Vec::with_capacity(table.len());
    for (idx, (spec, entries)) in table.into_iter().enumerate() {
        let mut tensors = Vec::with_capacity(entries.len());
        for e in entries {
            let end = e.offset.checked_add(e.len).filter(|&end| end <= data_len);
            if end.is_none() {
                return Err(Error::Truncated(format!(
                    "layer {idx} tensor at {}+{} exceeds {data_len} stored values",
                    e.offset, e.len
                )));
            }
            let start = e.offset as usize * 4;
            let values = data[start..start + e.len as usize * 4]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect();
            tensors.push(Tensor::new(e.dims, values)?);
        }
        layers.push(Layer { spec, tensors });
    }
    NetworkWeights::new(input_resolution, input_channels, layers, taps)
}

/// Serializes with parameters rounded to `f32`.
pub fn write_weights(net: &NetworkWeights) -> Vec<u8> {
    let mut out = Vec::new();
    let put32 = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put32(&mut out, net.input_resolution);
    put32(&mut out, net.input_channels);
    put32(&mut out, net.layers.len());
    let mut offset = 0u64;
    for layer in &net.layers {
        let s = &layer.spec;
        out.extend_from_slice(&s.kind.code().to_le_bytes());
        for v in [
            s.in_channels,
            s.out_channels,
            s.in_resolution,
            s.out_resolution,
            s.mid_channels,
        ] {
            put32(&mut out, v);
        }
        put32(&mut out, layer.tensors.len());
        for t in &layer.tensors {
            put32(&mut out, t.dims.len());
            for &d in &t.dims {
                put32(&mut out, d);
            }
            out.extend_from_slice(&offset.to_le_bytes());
            out.extend_from_slice(&(t.data.len() as u64).to_le_bytes());
            offset += t.data.len() as u64;
        }
    }
    put32(&mut out, net.taps.len());
    for tap in &net.taps {
        put32(&mut out, tap.name.len());
        out.extend_from_slice(tap.name.as_bytes());
        put32(&mut out, tap.layer);
    }
    out.extend_from_slice(&offset.to_le_bytes());
    for layer in &net.layers {
        for t in &layer.tensors {
            for &v in &t.data {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    out
}

pub fn load_weights(path: &Path) -> Result<NetworkWeights> {
    read_weights(&fs::read(path)?)
}

pub fn save_weights(net: &NetworkWeights, path: &Path) -> Result<()> {
    fs::write(path, write_weights(net))?;
    Ok(())
}
