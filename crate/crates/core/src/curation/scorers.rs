use super::record::{AESTHETIC, CLARITY, GAME_STYLE, LUMINANCE, MOTION_RICHNESS};
use super::video::{luminance_quality, motion_richness, FlowParams};
use crate::error::{Error, Result};
use crate::raster::Rgba8Image;

/// A deterministic per-asset score with a declared closed range.
pub trait Scorer: Send + Sync {
    /// Key the score is stored under.
    fn name(&self) -> &'static str;
    /// Provenance tag written to the manifest.
    fn id(&self) -> &'static str;
    fn range(&self) -> (f64, f64);
    fn compute(&self, frames: &[Rgba8Image]) -> Result<f64>;

    fn score(&self, frames: &[Rgba8Image]) -> Result<f64> {
        if frames.is_empty() || frames[0].is_empty() {
            return Err(Error::EmptyImage);
        }
        let (lo, hi) = self.range();
        Ok(self.compute(frames)?.clamp(lo, hi))
    }
}

fn mean_over_frames(frames: &[Rgba8Image], f: impl Fn(&Rgba8Image) -> f64) -> f64 {
    frames.iter().map(f).sum::<f64>() / frames.len() as f64
}

/// Mean HSV saturation; game art skews colourful.
pub struct SaturationStyle;

impl Scorer for SaturationStyle {
    fn name(&self) -> &'static str {
        GAME_STYLE
    }
    fn id(&self) -> &'static str {
        "saturation-v1"
    }
    fn range(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
    fn compute(&self, frames: &[Rgba8Image]) -> Result<f64> {
        Ok(mean_over_frames(frames, |img| {
            let sum: f64 = img
                .pixels()
                .chunks_exact(4)
                .map(|p| {
                    let max = p[0].max(p[1]).max(p[2]);
                    let min = p[0].min(p[1]).min(p[2]);
                    if max == 0 { 0.0 } else { (max - min) as f64 / max as f64 }
                })
                .sum();
            sum / (img.width() * img.height()) as f64
        }))
    }
}

/// Mean absolute luma gradient, saturating at 32 levels per pixel.
pub struct GradientClarity;

impl Scorer for GradientClarity {
    fn name(&self) -> &'static str {
        CLARITY
    }
    fn id(&self) -> &'static str {
        "gradient-v1"
    }
    fn range(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
    fn compute(&self, frames: &[Rgba8Image]) -> Result<f64> {
        Ok(mean_over_frames(frames, |img| {
            let (w, h) = (img.width(), img.height());
            let l: Vec<f64> = img.pixels().chunks_exact(4).map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64).collect();
            let mut total = 0.0;
            for y in 0..h {
                for x in 0..w {
                    let c = l[y * w + x];
                    if x + 1 < w {
                        total += (l[y * w + x + 1] - c).abs();
                    }
                    if y + 1 < h {
                        total += (l[(y + 1) * w + x] - c).abs();
                    }
                }
            }
            total / (w * h) as f64 / 32.0
        }))
    }
}

/// Luminance quality scaled by a contrast term.
pub struct HistogramAesthetic;

impl Scorer for HistogramAesthetic {
    fn name(&self) -> &'static str {
        AESTHETIC
    }
    fn id(&self) -> &'static str {
        "histogram-v1"
    }
    fn range(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
    fn compute(&self, frames: &[Rgba8Image]) -> Result<f64> {
        let contrast = mean_over_frames(frames, |img| {
            let l: Vec<f64> = (0..img.height()).flat_map(|y| (0..img.width()).map(move |x| (x, y))).map(|(x, y)| img.luma(x, y) as f64).collect();
            let mean = l.iter().sum::<f64>() / l.len() as f64;
            (l.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / l.len() as f64).sqrt()
        });
        Ok(luminance_quality(frames)? * (0.5 + 0.5 * (contrast / 48.0).min(1.0)))
    }
}

pub struct LuminanceScorer;

impl Scorer for LuminanceScorer {
    fn name(&self) -> &'static str {
        LUMINANCE
    }
    fn id(&self) -> &'static str {
        "luma-histogram-v1"
    }
    fn range(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
    fn compute(&self, frames: &[Rgba8Image]) -> Result<f64> {
        luminance_quality(frames)
    }
}

pub struct MotionRichnessScorer(pub FlowParams);

impl Scorer for MotionRichnessScorer {
    fn name(&self) -> &'static str {
        MOTION_RICHNESS
    }
    fn id(&self) -> &'static str {
        "block-flow-entropy-v1"
    }
    fn range(&self) -> (f64, f64) {
        (0.0, 1.5 * self.0.fps)
    }
    fn compute(&self, frames: &[Rgba8Image]) -> Result<f64> {
        motion_richness(frames, &self.0)
    }
}
