use super::{ConditionBundle, Denoiser, Schedule, SeededNoise};
use crate::error::{Error, Result};
use crate::volume::{BinaryMask, LatentVolume, Shape};

/// Noise sub-stream used to re-noise the known region during inpainting.
pub const INPAINT_NOISE_STREAM: u64 = 1;

/// Euler-integrates `denoiser` from seeded noise at `t = 1` down to `t = 0`.
///
/// The initial noise is indexed by absolute coordinates (`cond.origin`), so a
/// window sampled on its own sees exactly the noise it would see inside the
/// full volume.
pub fn sample(
    denoiser: &dyn Denoiser,
    schedule: &Schedule,
    shape: Shape,
    seed: u64,
    cond: &ConditionBundle,
) -> Result<LatentVolume> {
    sample_observed(denoiser, schedule, shape, seed, cond, &mut |_, _| {})
}

/// [`sample`], reporting the state after every step as `(t, x_t)`, starting
/// with the initial noise at `t = 1`.
pub fn sample_observed(
    denoiser: &dyn Denoiser,
    schedule: &Schedule,
    shape: Shape,
    seed: u64,
    cond: &ConditionBundle,
    observer: &mut dyn FnMut(f32, &LatentVolume),
) -> Result<LatentVolume> {
    run(denoiser, schedule, shape, seed, cond, None, observer)
}

/// Blended inpainting with no extra conditioning.
pub fn sample_inpaint(
    denoiser: &dyn Denoiser,
    schedule: &Schedule,
    known: &LatentVolume,
    mask: &BinaryMask,
    seed: u64,
) -> Result<LatentVolume> {
    sample_inpaint_with(denoiser, schedule, known, mask, seed, ConditionBundle::default())
}

/// Blended inpainting: `mask == 1` cells are synthesized, `mask == 0` cells
/// are pinned to `known` re-noised to the current time after every step and
/// equal `known` bit-for-bit at the end.
///
/// `cond` supplies any extra conditioning; its mask and known fields are
/// replaced by the arguments.
pub fn sample_inpaint_with(
    denoiser: &dyn Denoiser,
    schedule: &Schedule,
    known: &LatentVolume,
    mask: &BinaryMask,
    seed: u64,
    mut cond: ConditionBundle,
) -> Result<LatentVolume> {
    mask.check_volume(known)?;
    let shape = known.shape();
    let known_noise = SeededNoise::with_stream(seed, INPAINT_NOISE_STREAM).volume(shape, cond.origin);
    cond.mask = Some(mask.clone());
    cond.known = Some(known.clone());
    let blend = Blend { known, mask, noise: &known_noise };
    run(denoiser, schedule, shape, seed, &cond, Some(&blend), &mut |_, _| {})
}

struct Blend<'a> {
    known: &'a LatentVolume,
    mask: &'a BinaryMask,
    noise: &'a LatentVolume,
}

impl Blend<'_> {
    fn apply(&self, x: &mut [f32], s: f32) {
        let shape = self.known.shape();
        let plane = shape.plane_len();
        let bits = self.mask.bits();
        let known = self.known.data();
        let noise = self.noise.data();
        for (i, v) in x.iter_mut().enumerate() {
            if bits[i % plane] == 0 {
                *v = if s == 0.0 { known[i] } else { s * noise[i] + (1.0 - s) * known[i] };
            }
        }
    }
}

fn run(
    denoiser: &dyn Denoiser,
    schedule: &Schedule,
    shape: Shape,
    seed: u64,
    cond: &ConditionBundle,
    blend: Option<&Blend<'_>>,
    observer: &mut dyn FnMut(f32, &LatentVolume),
) -> Result<LatentVolume> {
    let mut x = SeededNoise::new(seed).volume(shape, cond.origin);
    cond.validate_for(&x)?;
    observer(1.0, &x);
    for (t, next) in schedule.intervals() {
        let v = denoiser.velocity(&x, t, cond)?;
        if v.shape() != shape {
            return Err(Error::ShapeMismatch(format!("denoiser returned {} for latent {shape}", v.shape())));
        }
        let dt = t - next;
        let mut data = x.into_data();
        for (xi, vi) in data.iter_mut().zip(v.data()) {
            *xi -= dt * vi;
        }
        if let Some(blend) = blend {
            blend.apply(&mut data, next);
        }
        x = LatentVolume::new(shape, data)?;
        observer(next, &x);
    }
    Ok(x)
}
