//! Flow-matching sampling over a pluggable velocity field.
//!
//! Time runs from `t = 1` (pure noise) to `t = 0` (data) along the straight
//! path `x_t = t·ε + (1 − t)·x₀`. The sampler integrates it with explicit
//! Euler steps and never evaluates the velocity at `t = 0`.

mod noise;
mod sampler;
mod schedule;
mod toy;

pub use noise::SeededNoise;
pub use sampler::{sample, sample_inpaint, sample_inpaint_with, sample_observed, INPAINT_NOISE_STREAM};
pub use schedule::Schedule;
pub use toy::{BridgeDenoiser, ToyDenoiser};

use crate::error::{Error, Result};
use crate::volume::{BinaryMask, LatentVolume};

/// A velocity field `v(x, t | cond)`.
///
/// Implementations must return a volume with the same shape as `x` and be a
/// pure function of their arguments.
pub trait Denoiser: Send + Sync {
    fn velocity(&self, x: &LatentVolume, t: f32, cond: &ConditionBundle) -> Result<LatentVolume>;
}

impl<D: Denoiser + ?Sized> Denoiser for &D {
    fn velocity(&self, x: &LatentVolume, t: f32, cond: &ConditionBundle) -> Result<LatentVolume> {
        (**self).velocity(x, t, cond)
    }
}

impl<D: Denoiser + ?Sized> Denoiser for Box<D> {
    fn velocity(&self, x: &LatentVolume, t: f32, cond: &ConditionBundle) -> Result<LatentVolume> {
        (**self).velocity(x, t, cond)
    }
}

/// Everything a denoiser may condition on besides `x` and `t`.
#[derive(Clone, Debug, Default)]
pub struct ConditionBundle {
    /// Inpainting mask, 1 = synthesize, 0 = keep `known`.
    pub mask: Option<BinaryMask>,
    pub known: Option<LatentVolume>,
    /// Channels concatenated after the noisy latent (`[noisy | extra]`).
    pub extra_channels: Option<LatentVolume>,
    /// Compressed camera/action embedding for the frames being generated.
    pub pluecker: Option<LatentVolume>,
    /// Absolute `(t, h, w)` of `x`'s first cell inside the full volume.
    pub origin: (usize, usize, usize),
}

impl ConditionBundle {
    pub fn at(origin: (usize, usize, usize)) -> Self {
        Self { origin, ..Self::default() }
    }

    /// Checks the bundle against the shape of the latent being sampled.
    pub fn validate_for(&self, x: &LatentVolume) -> Result<()> {
        let s = x.shape();
        if let Some(mask) = &self.mask {
            let known = self
                .known
                .as_ref()
                .ok_or_else(|| Error::ShapeMismatch("mask supplied without known content".into()))?;
            mask.check_volume(x)?;
            if known.shape() != s {
                return Err(Error::ShapeMismatch(format!("known {} vs latent {s}", known.shape())));
            }
        }
        if let Some(extra) = &self.extra_channels {
            let e = extra.shape();
            if (e.frames, e.height, e.width) != (s.frames, s.height, s.width) {
                return Err(Error::ShapeMismatch(format!("extra channels {e} vs latent {s}")));
            }
        }
        Ok(())
    }

    /// The channel-concatenated model input: noisy latent first, then the
    /// condition channels.
    pub fn concat_input(&self, x: &LatentVolume) -> Result<LatentVolume> {
        match &self.extra_channels {
            Some(extra) => x.concat_channels(extra),
            None => Ok(x.clone()),
        }
    }
}
