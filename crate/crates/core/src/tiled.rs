//! Patch-wise spatiotemporal tiling for generative super-resolution.
//!
//! The target volume is covered by equally sized, overlapping windows. Each
//! window is denoised on its own with the upsampled low-resolution latent
//! concatenated after the noisy channels, and the windows are stitched back
//! by averaging wherever they overlap.

use rayon::prelude::*;

use crate::denoise::{sample, ConditionBundle, Denoiser, Schedule};
use crate::error::{Error, Result};
use crate::volume::{LatentVolume, Shape};

/// `(frames, height, width)` triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Extent3 {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
}

impl Extent3 {
    pub const fn new(frames: usize, height: usize, width: usize) -> Self {
        Self { frames, height, width }
    }

    fn axes(self) -> [usize; 3] {
        [self.frames, self.height, self.width]
    }
}

impl From<Shape> for Extent3 {
    fn from(s: Shape) -> Self {
        Self::new(s.frames, s.height, s.width)
    }
}

/// Production tile: 129 frames of 768×768 pixels.
pub const PRODUCTION_TILE: Extent3 = Extent3::new(129, 768, 768);
pub const DEFAULT_TILE: Extent3 = Extent3::new(9, 96, 96);
pub const DEFAULT_OVERLAP: Extent3 = Extent3::new(1, 24, 24);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TileWindow {
    pub t0: usize,
    pub h0: usize,
    pub w0: usize,
    pub t_len: usize,
    pub h_len: usize,
    pub w_len: usize,
}

impl TileWindow {
    pub fn origin(&self) -> (usize, usize, usize) {
        (self.t0, self.h0, self.w0)
    }

    pub fn extent(&self) -> (usize, usize, usize) {
        (self.t_len, self.h_len, self.w_len)
    }

    fn starts(&self) -> [usize; 3] {
        [self.t0, self.h0, self.w0]
    }

    fn lens(&self) -> [usize; 3] {
        [self.t_len, self.h_len, self.w_len]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TilePlan {
    pub target: Extent3,
    pub tile: Extent3,
    pub overlap: Extent3,
    pub windows: Vec<TileWindow>,
}

/// Start offsets along one axis.
///
/// Windows advance by `tile − overlap`; the last window is clamped to end
/// exactly at `length` instead of padding past it. An axis no longer than
/// the tile gets a single window at 0.
pub fn plan_axis(length: usize, tile: usize, overlap: usize) -> Result<Vec<usize>> {
    if overlap >= tile {
        return Err(Error::InvalidOverlap { overlap, tile });
    }
    if length == 0 {
        return Err(Error::InvalidParam("cannot tile an empty axis".into()));
    }
    if length <= tile {
        return Ok(vec![0]);
    }
    let stride = tile - overlap;
    let mut starts: Vec<usize> = (0..).map(|k| k * stride).take_while(|&s| s + tile < length).collect();
    let last = length - tile;
    if starts.last() != Some(&last) {
        starts.push(last);
    }
    starts.sort_unstable();
    starts.dedup();
    Ok(starts)
}

/// Cartesian product of the per-axis plans, in `(t, h, w)` lexicographic order.
pub fn make_plan(target: Extent3, tile: Extent3, overlap: Extent3) -> Result<TilePlan> {
    let per_axis: Vec<(Vec<usize>, usize)> = target
        .axes()
        .iter()
        .zip(tile.axes())
        .zip(overlap.axes())
        .map(|((&len, tile), overlap)| Ok((plan_axis(len, tile, overlap)?, tile.min(len))))
        .collect::<Result<_>>()?;
    let (ts, tl) = &per_axis[0];
    let (hs, hl) = &per_axis[1];
    let (ws, wl) = &per_axis[2];
    let mut windows = Vec::with_capacity(ts.len() * hs.len() * ws.len());
    for &t0 in ts {
        for &h0 in hs {
            for &w0 in ws {
                windows.push(TileWindow { t0, h0, w0, t_len: *tl, h_len: *hl, w_len: *wl });
            }
        }
    }
    Ok(TilePlan { target, tile, overlap, windows })
}

impl TilePlan {
    /// Number of windows covering each `(t, h, w)` cell, row-major.
    pub fn coverage_counts(&self) -> Vec<u32> {
        let [_, th, tw] = self.target.axes();
        let mut counts = vec![0u32; self.target.frames * th * tw];
        for win in &self.windows {
            for t in win.t0..win.t0 + win.t_len {
                for h in win.h0..win.h0 + win.h_len {
                    let row = (t * th + h) * tw;
                    for c in &mut counts[row + win.w0..row + win.w0 + win.w_len] {
                        *c += 1;
                    }
                }
            }
        }
        counts
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlendMode {
    /// Plain mean of all windows covering a cell.
    #[default]
    Uniform,
    /// Weighted mean with linear ramps across interior overlaps.
    Feathered,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TileParams {
    pub tile: Extent3,
    pub overlap: Extent3,
    pub blend: BlendMode,
}

impl Default for TileParams {
    fn default() -> Self {
        Self { tile: DEFAULT_TILE, overlap: DEFAULT_OVERLAP, blend: BlendMode::Uniform }
    }
}

/// Separable bilinear upsampling over height and width with corner-aligned
/// sampling: output index `i` reads source position `i·(n−1)/(m−1)`.
pub fn upsample(lr: &LatentVolume, factor_h: usize, factor_w: usize) -> Result<LatentVolume> {
    if factor_h == 0 || factor_w == 0 {
        return Err(Error::InvalidParam(format!("upsampling factors must be ≥ 1, got {factor_h}x{factor_w}")));
    }
    if factor_h == 1 && factor_w == 1 {
        return Ok(lr.clone());
    }
    let s = lr.shape();
    let (oh, ow) = (s.height * factor_h, s.width * factor_w);
    let rows = taps(s.height, oh);
    let cols = taps(s.width, ow);
    let out = Shape::new(s.channels, s.frames, oh, ow);
    let mut data = Vec::with_capacity(out.len());
    for c in 0..s.channels {
        for t in 0..s.frames {
            for &(h0, h1, fh) in &rows {
                for &(w0, w1, fw) in &cols {
                    let top = lerp(lr.get(c, t, h0, w0) as f64, lr.get(c, t, h0, w1) as f64, fw);
                    let bottom = lerp(lr.get(c, t, h1, w0) as f64, lr.get(c, t, h1, w1) as f64, fw);
                    data.push(lerp(top, bottom, fh) as f32);
                }
            }
        }
    }
    LatentVolume::new(out, data)
}

fn taps(n: usize, m: usize) -> Vec<(usize, usize, f64)> {
    (0..m)
        .map(|i| {
            if n == 1 || m == 1 {
                return (0, 0, 0.0);
            }
            let pos = i as f64 * (n - 1) as f64 / (m - 1) as f64;
            let lo = (pos.floor() as usize).min(n - 2);
            (lo, lo + 1, pos - lo as f64)
        })
        .collect()
}

#[inline]
fn lerp(a: f64, b: f64, f: f64) -> f64 {
    if f == 0.0 {
        a
    } else {
        a + (b - a) * f
    }
}

/// Stitches per-window results into a `shape`-sized volume.
pub fn reassemble(shape: Shape, tiles: &[(TileWindow, LatentVolume)], mode: BlendMode) -> Result<LatentVolume> {
    let target = Extent3::from(shape);
    // -0.0 is the additive identity for every f32, so a cell covered once
    // comes out bit-identical to its only contribution.
    let mut sum = vec![-0.0f32; shape.len()];
    let mut weight = vec![0.0f32; target.frames * target.height * target.width];
    for (win, vol) in tiles {
        let vs = vol.shape();
        if vs.channels != shape.channels || (vs.frames, vs.height, vs.width) != win.extent() {
            return Err(Error::ShapeMismatch(format!("tile {vs} does not fit window {win:?}")));
        }
        if win.t0 + win.t_len > shape.frames || win.h0 + win.h_len > shape.height || win.w0 + win.w_len > shape.width {
            return Err(Error::ShapeMismatch(format!("window {win:?} exceeds {shape}")));
        }
        let ramps = match mode {
            BlendMode::Uniform => None,
            BlendMode::Feathered => Some(feather_ramps(win, target)),
        };
        for t in 0..win.t_len {
            for h in 0..win.h_len {
                for w in 0..win.w_len {
                    let wt = ramps.as_ref().map_or(1.0, |r| r[0][t] * r[1][h] * r[2][w]);
                    let cell = ((win.t0 + t) * shape.height + win.h0 + h) * shape.width + win.w0 + w;
                    weight[cell] += wt;
                    for c in 0..shape.channels {
                        let v = vol.get(c, t, h, w);
                        sum[c * weight.len() + cell] += if ramps.is_some() { wt * v } else { v };
                    }
                }
            }
        }
    }
    let plane = weight.len();
    if let Some(cell) = weight.iter().position(|&w| w == 0.0) {
        return Err(Error::ShapeMismatch(format!("cell {cell} is not covered by any tile")));
    }
    for (i, v) in sum.iter_mut().enumerate() {
        *v /= weight[i % plane];
    }
    LatentVolume::new(shape, sum)
}

fn feather_ramps(win: &TileWindow, target: Extent3) -> [Vec<f32>; 3] {
    let full = target.axes();
    let starts = win.starts();
    let lens = win.lens();
    std::array::from_fn(|axis| {
        let (s, len, n) = (starts[axis], lens[axis], full[axis]);
        // ramps span half the window on each interior side
        let ramp = (len / 2).max(1) as f32;
        (0..len)
            .map(|i| {
                let left = if s > 0 { ((i + 1) as f32 / ramp).min(1.0) } else { 1.0 };
                let right = if s + len < n { ((len - i) as f32 / ramp).min(1.0) } else { 1.0 };
                left.min(right)
            })
            .collect()
    })
}

/// Denoises every window of `plan` independently and stitches the results.
///
/// `condition`, when given, is a full-size latent whose matching window is
/// concatenated after the noisy channels of each tile. Noise is indexed by
/// absolute coordinates, so a one-window plan reproduces untiled sampling.
pub fn sample_tiled(
    denoiser: &dyn Denoiser,
    schedule: &Schedule,
    shape: Shape,
    seed: u64,
    plan: &TilePlan,
    condition: Option<&LatentVolume>,
    blend: BlendMode,
) -> Result<LatentVolume> {
    if plan.target != Extent3::from(shape) {
        return Err(Error::ShapeMismatch(format!("plan for {:?} used on {shape}", plan.target)));
    }
    let tiles: Vec<(TileWindow, LatentVolume)> = plan
        .windows
        .par_iter()
        .map(|win| {
            let cond = ConditionBundle {
                extra_channels: condition.map(|c| c.window(win.origin(), win.extent())).transpose()?,
                ..ConditionBundle::at(win.origin())
            };
            let tile_shape = Shape::new(shape.channels, win.t_len, win.h_len, win.w_len);
            Ok((*win, sample(denoiser, schedule, tile_shape, seed, &cond)?))
        })
        .collect::<Result<_>>()?;
    reassemble(shape, &tiles, blend)
}

/// Generative ×`scale` super-resolution of a low-resolution latent video.
pub fn upscale_video(
    lr: &LatentVolume,
    scale: usize,
    denoiser: &dyn Denoiser,
    schedule: &Schedule,
    params: &TileParams,
    seed: u64,
) -> Result<LatentVolume> {
    if scale != 2 && scale != 4 {
        return Err(Error::InvalidScale(scale));
    }
    let cond = upsample(lr, scale, scale)?;
    let shape = cond.shape();
    let plan = make_plan(Extent3::from(shape), params.tile, params.overlap)?;
    sample_tiled(denoiser, schedule, shape, seed, &plan, Some(&cond), params.blend)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::{SeededNoise, ToyDenoiser};
    use proptest::prelude::*;

    #[test]
    fn worked_axis_plans() {
        assert_eq!(plan_axis(1536, 768, 256).unwrap(), vec![0, 512, 768]);
        assert_eq!(plan_axis(500, 768, 256).unwrap(), vec![0]);
        assert_eq!(plan_axis(768, 768, 0).unwrap(), vec![0]);
        assert_eq!(plan_axis(1536, 768, 0).unwrap(), vec![0, 768]);
        assert_eq!(plan_axis(10, 4, 1).unwrap(), vec![0, 3, 6]);
        assert!(matches!(plan_axis(10, 4, 4), Err(Error::InvalidOverlap { overlap: 4, tile: 4 })));
    }

    #[test]
    fn production_plan_has_three_windows() {
        let plan = make_plan(Extent3::new(129, 768, 1536), PRODUCTION_TILE, Extent3::new(0, 0, 256)).unwrap();
        assert_eq!(plan.windows.len(), 3);
        assert!(plan.windows.iter().all(|w| w.extent() == (129, 768, 768)));
    }

    #[test]
    fn small_target_is_one_window() {
        let plan = make_plan(Extent3::new(3, 20, 30), DEFAULT_TILE, DEFAULT_OVERLAP).unwrap();
        assert_eq!(plan.windows, vec![TileWindow { t0: 0, h0: 0, w0: 0, t_len: 3, h_len: 20, w_len: 30 }]);
    }

    #[test]
    fn ramp_upsample() {
        let lr = LatentVolume::new(Shape::new(1, 1, 1, 2), vec![0.0, 1.0]).unwrap();
        let up = upsample(&lr, 1, 2).unwrap();
        let expected = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        for (a, b) in up.data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn upsample_constant_and_identity() {
        let c = LatentVolume::filled(Shape::new(2, 2, 3, 3), 0.3);
        assert!(upsample(&c, 4, 2).unwrap().data().iter().all(|&v| v == 0.3));
        let v = SeededNoise::new(1).volume(Shape::new(2, 1, 3, 4), (0, 0, 0));
        assert!(upsample(&v, 1, 1).unwrap().bit_eq(&v));
    }

    #[test]
    fn upsample_exact_on_planar_ramp() {
        let lr = LatentVolume::from_fn(Shape::new(1, 1, 3, 4), |_, _, h, w| 0.5 * h as f32 - 0.25 * w as f32).unwrap();
        let up = upsample(&lr, 2, 4).unwrap();
        for h in 0..6 {
            for w in 0..16 {
                let sh = h as f32 * 2.0 / 5.0;
                let sw = w as f32 * 3.0 / 15.0;
                assert!((up.get(0, 0, h, w) - (0.5 * sh - 0.25 * sw)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn overlap_of_two_constant_tiles_averages() {
        let shape = Shape::new(1, 1, 1, 6);
        let a = TileWindow { t0: 0, h0: 0, w0: 0, t_len: 1, h_len: 1, w_len: 4 };
        let b = TileWindow { w0: 2, ..a };
        let tiles = [
            (a, LatentVolume::filled(Shape::new(1, 1, 1, 4), 0.2)),
            (b, LatentVolume::filled(Shape::new(1, 1, 1, 4), 0.6)),
        ];
        let out = reassemble(shape, &tiles, BlendMode::Uniform).unwrap();
        let expected = [0.2, 0.2, 0.4, 0.4, 0.6, 0.6];
        for (v, e) in out.data().iter().zip(expected) {
            assert!((v - e).abs() <= 1e-6);
        }
    }

    #[test]
    fn uncovered_cell_is_an_error() {
        let win = TileWindow { t0: 0, h0: 0, w0: 0, t_len: 1, h_len: 1, w_len: 2 };
        let r = reassemble(Shape::new(1, 1, 1, 3), &[(win, LatentVolume::zeros(Shape::new(1, 1, 1, 2)))], BlendMode::Uniform);
        assert!(r.is_err());
    }

    #[test]
    fn feathered_reassembly_of_agreeing_tiles_is_exactish() {
        let shape = Shape::new(2, 3, 20, 20);
        let truth = SeededNoise::new(5).volume(shape, (0, 0, 0));
        let plan = make_plan(Extent3::from(shape), Extent3::new(2, 8, 8), Extent3::new(1, 3, 3)).unwrap();
        let tiles: Vec<_> = plan.windows.iter().map(|w| (*w, truth.window(w.origin(), w.extent()).unwrap())).collect();
        assert!(reassemble(shape, &tiles, BlendMode::Feathered).unwrap().max_abs_diff(&truth) < 1e-5);
        assert!(reassemble(shape, &tiles, BlendMode::Uniform).unwrap().max_abs_diff(&truth) < 1e-6);
    }

    #[test]
    fn single_window_matches_untiled_bit_exactly() {
        let lr = SeededNoise::new(2).volume(Shape::new(4, 2, 6, 5), (0, 0, 0));
        let truth = SeededNoise::new(3).volume(Shape::new(4, 2, 12, 10), (0, 0, 0));
        let toy = ToyDenoiser::new(truth);
        let schedule = Schedule::uniform(4).unwrap();
        let params = TileParams { tile: Extent3::new(8, 64, 64), overlap: Extent3::new(1, 8, 8), ..Default::default() };
        let tiled = upscale_video(&lr, 2, &toy, &schedule, &params, 7).unwrap();
        let cond = ConditionBundle { extra_channels: Some(upsample(&lr, 2, 2).unwrap()), ..Default::default() };
        let untiled = sample(&toy, &schedule, tiled.shape(), 7, &cond).unwrap();
        assert!(tiled.bit_eq(&untiled));
    }

    #[test]
    fn scale_must_be_two_or_four() {
        let lr = LatentVolume::zeros(Shape::new(1, 1, 2, 2));
        let toy = ToyDenoiser::new(lr.clone());
        let r = upscale_video(&lr, 3, &toy, &Schedule::uniform(1).unwrap(), &TileParams::default(), 0);
        assert!(matches!(r, Err(Error::InvalidScale(3))));
    }

    struct LayoutProbe;
    impl Denoiser for LayoutProbe {
        fn velocity(&self, x: &LatentVolume, t: f32, cond: &ConditionBundle) -> Result<LatentVolume> {
            let input = cond.concat_input(x)?;
            let c = x.shape().channels;
            assert_eq!(input.shape().channels, 2 * c);
            // [noisy | condition]
            let noisy = input.window((0, 0, 0), (x.shape().frames, x.shape().height, x.shape().width))?;
            assert_eq!(&noisy.data()[..x.data().len()], x.data());
            let extra = cond.extra_channels.as_ref().unwrap();
            assert_eq!(&input.data()[x.data().len()..], extra.data());
            x.map(|v| v / t)
        }
    }

    #[test]
    fn conditioned_input_has_twice_the_channels() {
        let lr = SeededNoise::new(4).volume(Shape::new(3, 3, 10, 10), (0, 0, 0));
        let params = TileParams { tile: Extent3::new(2, 8, 8), overlap: Extent3::new(1, 2, 2), ..Default::default() };
        upscale_video(&lr, 2, &LayoutProbe, &Schedule::uniform(2).unwrap(), &params, 1).unwrap();
    }

    proptest! {
        #[test]
        fn axis_plan_covers_every_index(length in 1usize..400, tile in 1usize..100, overlap_frac in 0.0f64..1.0) {
            let overlap = ((tile as f64) * overlap_frac) as usize;
            prop_assume!(overlap < tile);
            let starts = plan_axis(length, tile, overlap).unwrap();
            let win = tile.min(length);
            let mut covered = vec![0u32; length];
            for &s in &starts {
                prop_assert!(s + win <= length);
                for c in &mut covered[s..s + win] {
                    *c += 1;
                }
            }
            prop_assert!(covered.iter().all(|&c| c >= 1));
            prop_assert!(starts.windows(2).all(|p| p[0] < p[1]));
        }
    }
}
