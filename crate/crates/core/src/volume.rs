//! The 4-D latent container and the per-cell binary mask that accompanies it.
//!
//! Images are volumes with a single frame. All data is stored row-major in
//! `(c, t, h, w)` order.

use std::fmt;
use std::ops::Range;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    pub channels: usize,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(channels: usize, frames: usize, height: usize, width: usize) -> Self {
        Self { channels, frames, height, width }
    }

    pub fn len(&self) -> usize {
        self.channels * self.frames * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat offset of `(c, t, h, w)`.
    #[inline]
    pub fn index(&self, c: usize, t: usize, h: usize, w: usize) -> usize {
        ((c * self.frames + t) * self.height + h) * self.width + w
    }

    /// Inverse of [`Shape::index`].
    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize, usize, usize) {
        let w = index % self.width;
        let rest = index / self.width;
        let h = rest % self.height;
        let rest = rest / self.height;
        let t = rest % self.frames;
        (rest / self.frames, t, h, w)
    }

    /// Cells in one channel plane (`t · h · w`).
    pub fn plane_len(&self) -> usize {
        self.frames * self.height * self.width
    }

    pub fn with_channels(self, channels: usize) -> Self {
        Self { channels, ..self }
    }

    pub fn with_frames(self, frames: usize) -> Self {
        Self { frames, ..self }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}x{}", self.channels, self.frames, self.height, self.width)
    }
}

/// Real-valued `channels × frames × height × width` grid.
///
/// Every entry is finite. Values are immutable after construction; the
/// operations below all return new volumes.
#[derive(Clone, PartialEq)]
pub struct LatentVolume {
    shape: Shape,
    data: Vec<f32>,
}

impl fmt::Debug for LatentVolume {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LatentVolume").field("shape", &self.shape).finish_non_exhaustive()
    }
}

impl LatentVolume {
    pub fn new(shape: Shape, data: Vec<f32>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::DimMismatch(format!(
                "{} cells declared by shape {shape}, {} supplied",
                shape.len(),
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { shape, data })
    }

    /// Skips the finiteness scan; callers guarantee both invariants.
    pub(crate) fn from_parts(shape: Shape, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), shape.len());
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Self { shape, data }
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: Shape, value: f32) -> Self {
        assert!(value.is_finite(), "fill value must be finite");
        Self { shape, data: vec![value; shape.len()] }
    }

    /// Builds a volume by evaluating `f(c, t, h, w)` at every cell.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize, usize) -> f32) -> Result<Self> {
        let mut data = Vec::with_capacity(shape.len());
        for c in 0..shape.channels {
            for t in 0..shape.frames {
                for h in 0..shape.height {
                    for w in 0..shape.width {
                        data.push(f(c, t, h, w));
                    }
                }
            }
        }
        Self::new(shape, data)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize, t: usize, h: usize, w: usize) -> f32 {
        self.data[self.shape.index(c, t, h, w)]
    }

    /// Elementwise map; the result must stay finite.
    pub fn map(&self, f: impl Fn(f32) -> f32) -> Result<Self> {
        Self::new(self.shape, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Copies the `(t, h, w)` box at `origin` with the given `extent`, all channels.
    pub fn window(&self, origin: (usize, usize, usize), extent: (usize, usize, usize)) -> Result<Self> {
        let (t0, h0, w0) = origin;
        let (tl, hl, wl) = extent;
        let s = self.shape;
        if t0 + tl > s.frames || h0 + hl > s.height || w0 + wl > s.width {
            return Err(Error::ShapeMismatch(format!(
                "window at ({t0},{h0},{w0}) of extent ({tl},{hl},{wl}) exceeds {s}"
            )));
        }
        let out = Shape::new(s.channels, tl, hl, wl);
        let mut data = Vec::with_capacity(out.len());
        for c in 0..s.channels {
            for t in t0..t0 + tl {
                for h in h0..h0 + hl {
                    let start = s.index(c, t, h, w0);
                    data.extend_from_slice(&self.data[start..start + wl]);
                }
            }
        }
        Ok(Self::from_parts(out, data))
    }

    pub fn frames(&self, range: Range<usize>) -> Result<Self> {
        if range.start > range.end {
            return Err(Error::ShapeMismatch(format!("empty frame range {range:?}")));
        }
        let s = self.shape;
        self.window((range.start, 0, 0), (range.end - range.start, s.height, s.width))
    }

    /// Stacks volumes along the frame axis. All parts share channels, height and width.
    pub fn concat_frames(parts: &[&LatentVolume]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::ShapeMismatch("nothing to concatenate".into()))?
            .shape;
        for p in parts {
            let s = p.shape;
            if (s.channels, s.height, s.width) != (first.channels, first.height, first.width) {
                return Err(Error::ShapeMismatch(format!("cannot stack {s} onto {first} along frames")));
            }
        }
        let frames = parts.iter().map(|p| p.shape.frames).sum();
        let out = first.with_frames(frames);
        let mut data = Vec::with_capacity(out.len());
        for c in 0..first.channels {
            for p in parts {
                let plane = p.shape.plane_len();
                data.extend_from_slice(&p.data[c * plane..(c + 1) * plane]);
            }
        }
        Ok(Self::from_parts(out, data))
    }

    /// Stacks `self` then `other` along the channel axis.
    pub fn concat_channels(&self, other: &LatentVolume) -> Result<Self> {
        let (a, b) = (self.shape, other.shape);
        if (a.frames, a.height, a.width) != (b.frames, b.height, b.width) {
            return Err(Error::ShapeMismatch(format!("cannot stack {b} onto {a} along channels")));
        }
        let mut data = Vec::with_capacity(a.len() + b.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Self::from_parts(a.with_channels(a.channels + b.channels), data))
    }

    /// Largest absolute elementwise difference. Panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &LatentVolume) -> f32 {
        assert_eq!(self.shape, other.shape, "max_abs_diff on different shapes");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }

    /// True when every entry has the same bit pattern as in `other`.
    pub fn bit_eq(&self, other: &LatentVolume) -> bool {
        self.shape == other.shape
            && self.data.iter().zip(&other.data).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Per-cell 0/1 mask over `(frames, height, width)`, broadcast across channels.
#[derive(Clone, PartialEq, Eq)]
pub struct BinaryMask {
    frames: usize,
    height: usize,
    width: usize,
    bits: Vec<u8>,
}

impl fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinaryMask({}x{}x{}, ones={})", self.frames, self.height, self.width, self.count_ones())
    }
}

impl BinaryMask {
    pub fn new(frames: usize, height: usize, width: usize, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != frames * height * width {
            return Err(Error::DimMismatch(format!(
                "mask {frames}x{height}x{width} needs {} bits, got {}",
                frames * height * width,
                bits.len()
            )));
        }
        if let Some(index) = bits.iter().position(|&b| b > 1) {
            return Err(Error::InvalidMask { index, value: bits[index] });
        }
        Ok(Self { frames, height, width, bits })
    }

    pub fn filled(frames: usize, height: usize, width: usize, on: bool) -> Self {
        Self { frames, height, width, bits: vec![on as u8; frames * height * width] }
    }

    pub fn from_fn(frames: usize, height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(frames * height * width);
        for t in 0..frames {
            for h in 0..height {
                for w in 0..width {
                    bits.push(f(t, h, w) as u8);
                }
            }
        }
        Self { frames, height, width, bits }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, t: usize, h: usize, w: usize) -> bool {
        self.bits[(t * self.height + h) * self.width + w] == 1
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    /// Flips every bit.
    pub fn inverted(&self) -> Self {
        Self { bits: self.bits.iter().map(|b| 1 - b).collect(), ..*self }
    }

    /// Cellwise OR of two masks of the same size.
    pub fn union(&self, other: &BinaryMask) -> Result<Self> {
        self.check_dims(other.frames, other.height, other.width)?;
        Ok(Self { bits: self.bits.iter().zip(&other.bits).map(|(a, b)| a | b).collect(), ..*self })
    }

    /// Errors unless the mask covers exactly `frames × height × width`.
    pub fn check_dims(&self, frames: usize, height: usize, width: usize) -> Result<()> {
        if (self.frames, self.height, self.width) != (frames, height, width) {
            return Err(Error::ShapeMismatch(format!(
                "mask {}x{}x{} does not match {frames}x{height}x{width}",
                self.frames, self.height, self.width
            )));
        }
        Ok(())
    }

    pub fn check_volume(&self, vol: &LatentVolume) -> Result<()> {
        let s = vol.shape();
        self.check_dims(s.frames, s.height, s.width)
    }
}

impl std::ops::Index<(usize, usize, usize, usize)> for LatentVolume {
    type Output = f32;

    fn index(&self, (c, t, h, w): (usize, usize, usize, usize)) -> &f32 {
        &self.data[self.shape.index(c, t, h, w)]
    }
}
