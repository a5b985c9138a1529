//! The FGLV on-disk volume container.
//!
//! Layout, all little-endian:
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `b"FGLV"`               |
//! | 4      | 4    | version (`u32`, currently 1)  |
//! | 8      | 16   | dims `c, t, h, w` (`u32` each)|
//! | 24     | 4·n  | payload, `f32`, `(c,t,h,w)` row-major |

use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::{LatentVolume, Shape};

pub const MAGIC: [u8; 4] = *b"FGLV";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;

pub fn to_bytes(vol: &LatentVolume) -> Vec<u8> {
    let s = vol.shape();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * s.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for d in [s.channels, s.frames, s.height, s.width] {
        let d = u32::try_from(d).expect("volume dimension exceeds u32");
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in vol.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<LatentVolume> {
    if bytes.len() >= 4 && bytes[..4] != MAGIC {
        return Err(Error::BadMagic { found: bytes[..4].try_into().unwrap() });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedPayload { expected: HEADER_LEN, found: bytes.len() });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let dims = [word(8), word(12), word(16), word(20)].map(|d| d as usize);
    let cells = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|n| n.checked_mul(4).map(|b| (n, b)));
    let Some((cells, payload_len)) = cells else {
        return Err(Error::DimMismatch(format!("dims {dims:?} overflow")));
    };
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < payload_len {
        return Err(Error::TruncatedPayload { expected: payload_len, found: payload.len() });
    }
    if payload.len() > payload_len {
        return Err(Error::DimMismatch(format!(
            "dims {dims:?} describe {payload_len} payload bytes, file carries {}",
            payload.len()
        )));
    }
    let mut data = Vec::with_capacity(cells);
    data.extend(payload.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())));
    LatentVolume::new(Shape::new(dims[0], dims[1], dims[2], dims[3]), data)
}

pub fn save_volume(vol: &LatentVolume, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_bytes(vol)).map_err(|e| Error::io(path, e))
}

pub fn load_volume(path: impl AsRef<Path>) -> Result<LatentVolume> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
