//! Middlebury `.flo` files.
//!
//! Layout: `PIEH`, width and height as little-endian `u32`, then `width·height`
//! pairs of little-endian `f32` `(u, v)` in row-major order.

use std::io::Read;
use std::path::Path;

use flowsplit_core::FlowComponent;

use crate::error::{io_err, Error, Result};
use crate::report::write_atomic;

pub const MAGIC: [u8; 4] = *b"PIEH";

/// Value written for pixels without a flow estimate.
pub const UNKNOWN: f32 = 1e10;

/// Components above this magnitude are read as unknown.
pub const UNKNOWN_THRESHOLD: f32 = 1e9;

/// One time slice of a flow field.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSlice {
    width: usize,
    height: usize,
    data: Vec<[f32; 2]>,
}

impl FlowSlice {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![[0.0; 2]; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f32; 2]) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    /// Slice `t` of a flow component, channel 0 as `u` (along x) and channel
    /// 1 as `v`. Values are narrowed to `f32`.
    pub fn from_component(flow: &FlowComponent, t: usize) -> Self {
        let g = flow.grid();
        let (a, b) = (flow.channel(0).slice(t), flow.channel(1).slice(t));
        let data = a.iter().zip(b).map(|(&u, &v)| [u as f32, v as f32]).collect();
        Self { width: g.m(), height: g.n(), data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[[f32; 2]] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> [f32; 2] {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, uv: [f32; 2]) {
        self.data[y * self.width + x] = uv;
    }

    pub fn is_unknown(uv: [f32; 2]) -> bool {
        uv[0].abs() > UNKNOWN_THRESHOLD || uv[1].abs() > UNKNOWN_THRESHOLD
    }

    /// Euclidean length of each known vector; `None` for unknown pixels.
    pub fn magnitudes(&self) -> impl Iterator<Item = Option<f64>> + '_ {
        self.data.iter().map(|&uv| {
            (!Self::is_unknown(uv)).then(|| (uv[0] as f64).hypot(uv[1] as f64))
        })
    }

    pub fn same_size(&self, other: &Self) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::SizeMismatch(self.width, self.height, other.width, other.height));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(12 + 8 * self.data.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        for (i, uv) in self.data.iter().enumerate() {
            if !uv[0].is_finite() || !uv[1].is_finite() {
                return Err(Error::NonFinite { x: i % self.width, y: i / self.width });
            }
            out.extend_from_slice(&uv[0].to_le_bytes());
            out.extend_from_slice(&uv[1].to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let found = bytes.len() as u64;
        if bytes.len() < 12 {
            if bytes.len() >= 4 && bytes[..4] != MAGIC {
                return Err(Error::BadMagic(bytes[..4].try_into().unwrap()));
            }
            return Err(Error::Truncated { expected: 12, found });
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as u64;
        let (w, h) = (word(4), word(8));
        let expected = 12 + 8 * w * h;
        if found < expected {
            return Err(Error::Truncated { expected, found });
        }
        if found > expected {
            return Err(Error::TrailingBytes(found - expected));
        }
        let data = bytes[12..]
            .chunks_exact(8)
            .map(|c| {
                [
                    f32::from_le_bytes(c[..4].try_into().unwrap()),
                    f32::from_le_bytes(c[4..].try_into().unwrap()),
                ]
            })
            .collect();
        Ok(Self { width: w as usize, height: h as usize, data })
    }
}

pub fn write_flo(slice: &FlowSlice, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &slice.to_bytes()?)
}

pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowSlice> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(io_err(path))?;
    FlowSlice::from_bytes(&bytes)
}
