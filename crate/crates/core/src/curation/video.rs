use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Rgba8Image;

pub const HIST_BINS: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneParams {
    /// Cut when the mean per-channel chi-square distance exceeds this.
    pub cut_threshold: f64,
    pub min_len: usize,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self { cut_threshold: 0.25, min_len: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowParams {
    pub block: usize,
    pub radius: usize,
    /// Split where consecutive mean flow magnitudes differ by more than this.
    pub grad_threshold: f64,
    pub fps: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self { block: 16, radius: 4, grad_threshold: 0.5, fps: 24.0 }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if self.block == 0 || !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::InvalidParam(format!("block {} / fps {} must be positive", self.block, self.fps)));
        }
        Ok(())
    }
}

fn luma8([r, g, b, _]: [u8; 4]) -> u8 {
    ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
}

fn luma_plane(img: &Rgba8Image) -> Vec<u8> {
    img.pixels().chunks_exact(4).map(|p| luma8([p[0], p[1], p[2], p[3]])).collect()
}

fn check_frames(frames: &[Rgba8Image], min: usize) -> Result<()> {
    if frames.len() < min {
        return Err(Error::TooShort { frames: frames.len(), min });
    }
    let (w, h) = (frames[0].width(), frames[0].height());
    if w == 0 || h == 0 {
        return Err(Error::EmptyImage);
    }
    if let Some(i) = frames.iter().position(|f| (f.width(), f.height()) != (w, h)) {
        return Err(Error::DimMismatch(format!("frame {i} is {}x{}, frame 0 is {w}x{h}", frames[i].width(), frames[i].height())));
    }
    Ok(())
}

/// Normalized 32-bin histograms of R, G and B.
pub fn rgb_histogram(img: &Rgba8Image) -> [[f64; HIST_BINS]; 3] {
    let mut hist = [[0.0; HIST_BINS]; 3];
    for p in img.pixels().chunks_exact(4) {
        for c in 0..3 {
            hist[c][(p[c] >> 3) as usize] += 1.0;
        }
    }
    let n = (img.width() * img.height()).max(1) as f64;
    hist.iter_mut().flatten().for_each(|v| *v /= n);
    hist
}

/// Symmetric chi-square distance averaged over channels; 0 for identical
/// histograms, 1 for disjoint ones.
pub fn chi_square(a: &[[f64; HIST_BINS]; 3], b: &[[f64; HIST_BINS]; 3]) -> f64 {
    let mut total = 0.0;
    for c in 0..3 {
        for k in 0..HIST_BINS {
            let s = a[c][k] + b[c][k];
            if s > 0.0 {
                total += (a[c][k] - b[c][k]).powi(2) / s;
            }
        }
    }
    total / 6.0
}

pub fn scene_distances(frames: &[Rgba8Image]) -> Vec<f64> {
    let hists: Vec<_> = frames.par_iter().map(rgb_histogram).collect();
    hists.windows(2).map(|p| chi_square(&p[0], &p[1])).collect()
}

/// Partitions `[0, N)` into shots. Shots shorter than `min_len` are merged
/// into the next one; a short final shot joins its predecessor.
pub fn split_scenes(frames: &[Rgba8Image], params: &SceneParams) -> Result<Vec<(usize, usize)>> {
    check_frames(frames, 2)?;
    let cuts = scene_distances(frames)
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > params.cut_threshold)
        .map(|(i, _)| i + 1)
        .collect::<Vec<_>>();
    Ok(merge_short(&cuts, frames.len(), params.min_len))
}

fn merge_short(cuts: &[usize], n: usize, min_len: usize) -> Vec<(usize, usize)> {
    let mut clips = Vec::new();
    let mut start = 0;
    for &c in cuts {
        if c - start >= min_len {
            clips.push((start, c));
            start = c;
        }
    }
    match clips.last_mut() {
        Some(last) if n - start < min_len => last.1 = n,
        _ => clips.push((start, n)),
    }
    clips
}

/// Candidate displacements ordered by length, so the first minimum found is
/// the shortest vector.
fn search_order(radius: i32) -> Vec<(i32, i32)> {
    let mut v: Vec<(i32, i32)> =
        (-radius..=radius).flat_map(|dy| (-radius..=radius).map(move |dx| (dx, dy))).collect();
    v.sort_by_key(|&(dx, dy)| (dx * dx + dy * dy, dy, dx));
    v
}

/// Sum-of-absolute-differences block matching from `a` to `b`. Blocks are
/// laid on an interior grid so every candidate stays inside the frame.
pub fn block_flow(a: &Rgba8Image, b: &Rgba8Image, params: &FlowParams) -> Vec<(i32, i32)> {
    let (w, h) = (a.width(), a.height());
    let (la, lb) = (luma_plane(a), luma_plane(b));
    let (bs, r) = (params.block, params.radius);
    let order = search_order(r as i32);
    let mut out = Vec::new();
    let mut by = r;
    while by + bs + r <= h {
        let mut bx = r;
        while bx + bs + r <= w {
            let mut best = (u32::MAX, (0, 0));
            for &(dx, dy) in &order {
                let (ox, oy) = ((bx as i32 + dx) as usize, (by as i32 + dy) as usize);
                let mut sad = 0u32;
                for y in 0..bs {
                    let ra = &la[(by + y) * w + bx..][..bs];
                    let rb = &lb[(oy + y) * w + ox..][..bs];
                    sad += ra.iter().zip(rb).map(|(&p, &q)| p.abs_diff(q) as u32).sum::<u32>();
                    if sad >= best.0 {
                        break;
                    }
                }
                if sad < best.0 {
                    best = (sad, (dx, dy));
                    if sad == 0 {
                        break;
                    }
                }
            }
            out.push(best.1);
            bx += bs;
        }
        by += bs;
    }
    out
}

pub fn clip_flow(frames: &[Rgba8Image], params: &FlowParams) -> Vec<Vec<(i32, i32)>> {
    (0..frames.len().saturating_sub(1))
        .into_par_iter()
        .map(|t| block_flow(&frames[t], &frames[t + 1], params))
        .collect()
}

/// μ(t): mean block flow magnitude between frames t and t + 1.
pub fn mean_flow_series(flow: &[Vec<(i32, i32)>]) -> Vec<f64> {
    flow.iter()
        .map(|v| {
            if v.is_empty() {
                0.0
            } else {
                v.iter().map(|&(x, y)| ((x * x + y * y) as f64).sqrt()).sum::<f64>() / v.len() as f64
            }
        })
        .collect()
}

/// Splits a clip where the mean flow magnitude jumps. A jump between pairs
/// t and t + 1 starts a new sub-range at frame t + 1.
pub fn motion_split(frames: &[Rgba8Image], params: &FlowParams) -> Result<Vec<(usize, usize)>> {
    check_frames(frames, 3)?;
    params.validate()?;
    let mu = mean_flow_series(&clip_flow(frames, params));
    let mut ranges = Vec::new();
    let mut start = 0;
    for t in 0..mu.len() - 1 {
        if (mu[t + 1] - mu[t]).abs() > params.grad_threshold {
            ranges.push((start, t + 1));
            start = t + 1;
        }
    }
    ranges.push((start, frames.len()));
    Ok(ranges)
}

/// One minus the mean fraction of pixels in the two darkest and two
/// brightest of 32 luma bins.
pub fn luminance_quality(frames: &[Rgba8Image]) -> Result<f64> {
    if frames.is_empty() {
        return Err(Error::TooShort { frames: 0, min: 1 });
    }
    let mut total = 0.0;
    for f in frames {
        let plane = luma_plane(f);
        if plane.is_empty() {
            return Err(Error::EmptyImage);
        }
        let clipped = plane.iter().filter(|&&l| !(16..240).contains(&l)).count();
        total += clipped as f64 / plane.len() as f64;
    }
    Ok((1.0 - total / frames.len() as f64).clamp(0.0, 1.0))
}

pub const DIRECTION_BINS: usize = 8;

/// Direction bin of a non-zero flow vector, centred on the axes and
/// diagonals; `None` for zero motion.
pub fn direction_bin((dx, dy): (i32, i32)) -> Option<usize> {
    if dx == 0 && dy == 0 {
        return None;
    }
    let sector = (dy as f64).atan2(dx as f64) / (PI / 4.0);
    Some((sector.round() as i64).rem_euclid(DIRECTION_BINS as i64) as usize)
}

pub fn direction_entropy(flow: &[Vec<(i32, i32)>]) -> f64 {
    let mut hist = [0usize; DIRECTION_BINS];
    for &v in flow.iter().flatten() {
        if let Some(b) = direction_bin(v) {
            hist[b] += 1;
        }
    }
    let n: usize = hist.iter().sum();
    if n == 0 {
        return 0.0;
    }
    -hist.iter().filter(|&&c| c > 0).map(|&c| {
        let p = c as f64 / n as f64;
        p * p.log2()
    }).sum::<f64>()
}

/// Direction entropy in bits per second of footage (`frames / fps`).
pub fn motion_richness(frames: &[Rgba8Image], params: &FlowParams) -> Result<f64> {
    check_frames(frames, 2)?;
    params.validate()?;
    let seconds = frames.len() as f64 / params.fps;
    Ok(direction_entropy(&clip_flow(frames, params)) / seconds)
}

/// Smooth texture translated by `(ox, oy)` pixels; integer offsets shift it
/// exactly, and a 10 px horizontal period makes large jumps alias.
pub fn pan_texture(width: usize, height: usize, ox: i64, oy: i64) -> Rgba8Image {
    Rgba8Image::from_fn(width, height, |x, y| {
        let (u, v) = ((x as i64 - ox) as f64, (y as i64 - oy) as f64);
        let val = 128.0 + 50.0 * (2.0 * PI * u / 10.0).sin() + 40.0 * (2.0 * PI * v / 13.0).cos()
            + 20.0 * (2.0 * PI * (u + v) / 17.0).sin();
        let l = val.round().clamp(0.0, 255.0) as u8;
        [l, l, l, 255]
    })
}
