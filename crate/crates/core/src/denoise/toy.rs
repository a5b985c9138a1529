use super::{ConditionBundle, Denoiser};
use crate::error::{Error, Result};
use crate::volume::{BinaryMask, LatentVolume, Shape};

/// Closed-form velocity field `(x − target) / t` whose Euler flow lands
/// exactly on `target` at `t = 0` for any step count.
///
/// `target` may be larger than the latent being sampled; the window at
/// `cond.origin` is used then, which lets tiled and autoregressive callers
/// share one global target.
#[derive(Clone, Debug)]
pub struct ToyDenoiser {
    target: LatentVolume,
}

impl ToyDenoiser {
    pub fn new(target: LatentVolume) -> Self {
        Self { target }
    }

    pub fn target(&self) -> &LatentVolume {
        &self.target
    }

    fn target_for(&self, shape: Shape, origin: (usize, usize, usize)) -> Result<std::borrow::Cow<'_, LatentVolume>> {
        if shape == self.target.shape() && origin == (0, 0, 0) {
            return Ok(std::borrow::Cow::Borrowed(&self.target));
        }
        if shape.channels != self.target.shape().channels {
            return Err(Error::ShapeMismatch(format!(
                "toy target has {} channels, latent has {}",
                self.target.shape().channels,
                shape.channels
            )));
        }
        self.target
            .window(origin, (shape.frames, shape.height, shape.width))
            .map(std::borrow::Cow::Owned)
    }
}

impl Denoiser for ToyDenoiser {
    fn velocity(&self, x: &LatentVolume, t: f32, cond: &ConditionBundle) -> Result<LatentVolume> {
        let target = self.target_for(x.shape(), cond.origin)?;
        let data = x.data().iter().zip(target.data()).map(|(&xi, &yi)| (xi - yi) / t).collect();
        LatentVolume::new(x.shape(), data)
    }
}

/// A model-free stand-in that flows toward a deterministic fill of the
/// conditioning:
///
/// * unmasked cells go to `known`;
/// * masked cells are linearly interpolated between the nearest unmasked
///   cells along whichever axis (frames, rows or columns) has known cells on
///   both sides at the smallest gap, falling back to the nearest known cell;
/// * with no mask at all, the target is `extra_channels` (a conditioning
///   latent of the same channel count), else `known`, else zero.
#[derive(Clone, Copy, Debug, Default)]
pub struct BridgeDenoiser;

impl BridgeDenoiser {
    pub fn target(&self, shape: Shape, cond: &ConditionBundle) -> Result<LatentVolume> {
        let base = match (&cond.extra_channels, &cond.known) {
            (Some(extra), _) if extra.shape() == shape => extra.clone(),
            (_, Some(known)) if known.shape() == shape => known.clone(),
            _ => LatentVolume::zeros(shape),
        };
        let (Some(mask), Some(known)) = (&cond.mask, &cond.known) else {
            return Ok(base);
        };
        mask.check_dims(shape.frames, shape.height, shape.width)?;
        let recipes = fill_recipes(mask);
        let plane = shape.plane_len();
        let mut data = base.into_data();
        let known = known.data();
        for c in 0..shape.channels {
            let k = &known[c * plane..(c + 1) * plane];
            let out = &mut data[c * plane..(c + 1) * plane];
            for (i, r) in recipes.iter().enumerate() {
                out[i] = match *r {
                    Fill::Known => k[i],
                    Fill::Lerp { a, b, frac } => k[a] + (k[b] - k[a]) * frac,
                    Fill::Copy(a) => k[a],
                    Fill::Base => out[i],
                };
            }
        }
        LatentVolume::new(shape, data)
    }
}

impl Denoiser for BridgeDenoiser {
    fn velocity(&self, x: &LatentVolume, t: f32, cond: &ConditionBundle) -> Result<LatentVolume> {
        let target = self.target(x.shape(), cond)?;
        let data = x.data().iter().zip(target.data()).map(|(&xi, &yi)| (xi - yi) / t).collect();
        LatentVolume::new(x.shape(), data)
    }
}

#[derive(Clone, Copy, Debug)]
enum Fill {
    Known,
    Lerp { a: usize, b: usize, frac: f32 },
    Copy(usize),
    Base,
}

fn fill_recipes(mask: &BinaryMask) -> Vec<Fill> {
    let dims = [mask.frames(), mask.height(), mask.width()];
    let strides = [dims[1] * dims[2], dims[2], 1];
    let bits = mask.bits();
    let n = bits.len();
    // (gap, recipe) of the best two-sided and one-sided candidates so far
    let mut two_sided: Vec<Option<(usize, Fill)>> = vec![None; n];
    let mut one_sided: Vec<Option<(usize, Fill)>> = vec![None; n];

    for axis in 0..3 {
        let len = dims[axis];
        let stride = strides[axis];
        let mut prev = vec![None; len];
        let mut next = vec![None; len];
        for base in line_starts(dims, axis) {
            let mut last = None;
            for (i, p) in prev.iter_mut().enumerate() {
                if bits[base + i * stride] == 0 {
                    last = Some(i);
                }
                *p = last;
            }
            last = None;
            for i in (0..len).rev() {
                let idx = base + i * stride;
                if bits[idx] == 0 {
                    last = Some(i);
                }
                next[i] = last;
            }
            for i in 0..len {
                let idx = base + i * stride;
                if bits[idx] == 0 {
                    continue;
                }
                match (prev[i], next[i]) {
                    (Some(p), Some(q)) => {
                        let gap = q - p;
                        let fill = Fill::Lerp {
                            a: base + p * stride,
                            b: base + q * stride,
                            frac: (i - p) as f32 / gap as f32,
                        };
                        if two_sided[idx].is_none_or(|(g, _)| gap < g) {
                            two_sided[idx] = Some((gap, fill));
                        }
                    }
                    (Some(p), None) | (None, Some(p)) => {
                        let dist = i.abs_diff(p);
                        if one_sided[idx].is_none_or(|(d, _)| dist < d) {
                            one_sided[idx] = Some((dist, Fill::Copy(base + p * stride)));
                        }
                    }
                    (None, None) => {}
                }
            }
        }
    }

    (0..n)
        .map(|i| {
            if bits[i] == 0 {
                Fill::Known
            } else {
                two_sided[i].or(one_sided[i]).map_or(Fill::Base, |(_, f)| f)
            }
        })
        .collect()
}

/// Flat indices of the first cell of every line parallel to `axis`.
fn line_starts(dims: [usize; 3], axis: usize) -> Vec<usize> {
    let strides = [dims[1] * dims[2], dims[2], 1];
    let others: Vec<usize> = (0..3).filter(|&a| a != axis).collect();
    let mut out = Vec::with_capacity(dims[others[0]] * dims[others[1]]);
    for i in 0..dims[others[0]] {
        for j in 0..dims[others[1]] {
            out.push(i * strides[others[0]] + j * strides[others[1]]);
        }
    }
    out
}
