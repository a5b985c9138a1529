//! Wrap-tileable texture synthesis.
//!
//! Each active direction is handled by rolling the image by half its size so
//! the wrap seam lands on the midline, inpainting a centred band over that
//! midline, and rolling back. `Both` runs the horizontal pass and then the
//! vertical pass on its result; the second band crosses the first, which
//! repairs the corner seam as well.

use crate::codec::{decode, encode};
use crate::denoise::{sample_inpaint, Denoiser, Schedule};
use crate::error::{Error, Result};
use crate::raster::Rgba8Image;
use crate::volume::{BinaryMask, LatentVolume};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    /// Columns (image x).
    Width,
    /// Rows (image y).
    Height,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::Width => "width",
            Axis::Height => "height",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeamDirection {
    /// Tiles left-to-right: the left/right edges are made continuous.
    #[serde(alias = "h")]
    Horizontal,
    /// Tiles top-to-bottom.
    #[serde(alias = "v")]
    Vertical,
    #[serde(alias = "b")]
    Both,
}

impl SeamDirection {
    pub fn axes(self) -> &'static [Axis] {
        match self {
            SeamDirection::Horizontal => &[Axis::Width],
            SeamDirection::Vertical => &[Axis::Height],
            SeamDirection::Both => &[Axis::Width, Axis::Height],
        }
    }
}

impl std::str::FromStr for SeamDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "horizontal" | "h" => Ok(Self::Horizontal),
            "vertical" | "v" => Ok(Self::Vertical),
            "both" | "b" => Ok(Self::Both),
            other => Err(Error::InvalidParam(format!("unknown seam direction {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeamSpec {
    pub direction: SeamDirection,
    pub band_width: usize,
}

impl SeamSpec {
    pub fn new(direction: SeamDirection, band_width: usize) -> Self {
        Self { direction, band_width }
    }

    pub fn validate(&self, height: usize, width: usize) -> Result<()> {
        if self.band_width < 2 || !self.band_width.is_multiple_of(2) {
            return Err(Error::InvalidBand(self.band_width));
        }
        for &axis in self.direction.axes() {
            let len = match axis {
                Axis::Width => width,
                Axis::Height => height,
            };
            if self.band_width >= len {
                return Err(Error::BandTooWide { axis: axis.name(), band: self.band_width, len });
            }
            if len % 2 != 0 {
                return Err(Error::OddDimension { axis: axis.name(), len });
            }
        }
        Ok(())
    }
}

/// Rolls the volume by half its extent along `axis`:
/// `out[.., i] = in[.., (i + D/2) mod D]`. Applying it twice is the identity.
pub fn swap_halves(vol: &LatentVolume, axis: Axis) -> Result<LatentVolume> {
    let s = vol.shape();
    let len = match axis {
        Axis::Width => s.width,
        Axis::Height => s.height,
    };
    if len % 2 != 0 {
        return Err(Error::OddDimension { axis: axis.name(), len });
    }
    let half = len / 2;
    LatentVolume::new(
        s,
        (0..s.len())
            .map(|i| {
                let (c, t, h, w) = s.coords(i);
                match axis {
                    Axis::Width => vol.get(c, t, h, (w + half) % len),
                    Axis::Height => vol.get(c, t, (h + half) % len, w),
                }
            })
            .collect(),
    )
}

/// Single-frame mask with 1 on the band(s) centred on the midline(s).
pub fn band_mask(height: usize, width: usize, spec: &SeamSpec) -> Result<BinaryMask> {
    spec.validate(height, width)?;
    let half_band = spec.band_width / 2;
    let in_band = |pos: usize, len: usize| pos + half_band >= len / 2 && pos < len / 2 + half_band;
    let axes = spec.direction.axes();
    Ok(BinaryMask::from_fn(1, height, width, |_, h, w| {
        axes.iter().any(|&axis| match axis {
            Axis::Width => in_band(w, width),
            Axis::Height => in_band(h, height),
        })
    }))
}

/// Runs the swap/inpaint/restore passes in latent space. `latent` must be a
/// single-frame volume.
pub fn make_seamless_latent(
    latent: &LatentVolume,
    spec: &SeamSpec,
    denoiser: &dyn Denoiser,
    schedule: &Schedule,
    seed: u64,
) -> Result<LatentVolume> {
    let s = latent.shape();
    if s.frames != 1 {
        return Err(Error::WrongShape { expected: "Cx1xHxW".into(), actual: s.to_string() });
    }
    spec.validate(s.height, s.width)?;
    let mut current = latent.clone();
    for (pass, &axis) in spec.direction.axes().iter().enumerate() {
        let pass_spec = SeamSpec {
            direction: match axis {
                Axis::Width => SeamDirection::Horizontal,
                Axis::Height => SeamDirection::Vertical,
            },
            band_width: spec.band_width,
        };
        let mask = band_mask(s.height, s.width, &pass_spec)?;
        let swapped = swap_halves(&current, axis)?;
        let filled = sample_inpaint(denoiser, schedule, &swapped, &mask, seed.wrapping_add(pass as u64))?;
        current = swap_halves(&filled, axis)?;
    }
    Ok(current)
}

/// Encodes, makes the image wrap-tileable along `spec.direction` and decodes.
/// Pixels outside the rolled-back band keep their exact input values.
pub fn make_seamless(
    image: &Rgba8Image,
    spec: &SeamSpec,
    denoiser: &dyn Denoiser,
    schedule: &Schedule,
    seed: u64,
) -> Result<Rgba8Image> {
    spec.validate(image.height(), image.width())?;
    decode(&make_seamless_latent(&encode(image), spec, denoiser, schedule, seed)?)
}

/// The band mask mapped back into the input's coordinates: the cells
/// [`make_seamless`] may change.
pub fn edited_region(height: usize, width: usize, spec: &SeamSpec) -> Result<BinaryMask> {
    spec.validate(height, width)?;
    let half_band = spec.band_width / 2;
    // after rolling back, the band hugs both edges
    let near_edge = |pos: usize, len: usize| pos < half_band || pos >= len - half_band;
    let axes = spec.direction.axes();
    Ok(BinaryMask::from_fn(1, height, width, |_, h, w| {
        axes.iter().any(|&axis| match axis {
            Axis::Width => near_edge(w, width),
            Axis::Height => near_edge(h, height),
        })
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::{SeededNoise, ToyDenoiser};
    use crate::volume::Shape;
    use proptest::prelude::*;

    #[test]
    fn swap_columns() {
        let v = LatentVolume::new(Shape::new(1, 1, 1, 4), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(swap_halves(&v, Axis::Width).unwrap().data(), &[3.0, 4.0, 1.0, 2.0]);
        let v = LatentVolume::new(Shape::new(1, 1, 4, 1), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(swap_halves(&v, Axis::Height).unwrap().data(), &[3.0, 4.0, 1.0, 2.0]);
    }

    #[test]
    fn swap_symmetric_is_unchanged() {
        let v = LatentVolume::from_fn(Shape::new(2, 1, 3, 6), |c, _, h, w| (c + h + w % 3) as f32).unwrap();
        assert!(swap_halves(&v, Axis::Width).unwrap().bit_eq(&v));
    }

    #[test]
    fn swap_odd_rejected() {
        let v = LatentVolume::zeros(Shape::new(1, 1, 4, 5));
        assert!(matches!(swap_halves(&v, Axis::Width), Err(Error::OddDimension { len: 5, .. })));
    }

    #[test]
    fn band_columns_three_and_four() {
        let m = band_mask(2, 8, &SeamSpec::new(SeamDirection::Horizontal, 2)).unwrap();
        for h in 0..2 {
            let row: Vec<bool> = (0..8).map(|w| m.get(0, h, w)).collect();
            assert_eq!(row, [false, false, false, true, true, false, false, false]);
        }
        let m = band_mask(8, 3, &SeamSpec::new(SeamDirection::Vertical, 4)).unwrap();
        assert_eq!(m.count_ones(), 12);
        assert!(m.get(0, 2, 0) && m.get(0, 5, 2) && !m.get(0, 1, 0) && !m.get(0, 6, 0));
    }

    #[test]
    fn band_guards() {
        let spec = SeamSpec::new(SeamDirection::Horizontal, 8);
        assert!(matches!(band_mask(4, 8, &spec), Err(Error::BandTooWide { band: 8, len: 8, .. })));
        assert!(matches!(band_mask(4, 8, &SeamSpec::new(SeamDirection::Horizontal, 3)), Err(Error::InvalidBand(3))));
        assert!(matches!(band_mask(4, 7, &SeamSpec::new(SeamDirection::Horizontal, 2)), Err(Error::OddDimension { .. })));
        // an odd dimension on an inactive axis is fine
        assert!(band_mask(5, 8, &SeamSpec::new(SeamDirection::Horizontal, 2)).is_ok());
    }

    #[test]
    fn both_band_counts_by_inclusion_exclusion() {
        let m = band_mask(8, 8, &SeamSpec::new(SeamDirection::Both, 2)).unwrap();
        assert_eq!(m.count_ones(), 2 * (2 * 8) - 4);
    }

    fn noisy_image(w: usize, h: usize, seed: u64) -> Rgba8Image {
        let n = SeededNoise::new(seed);
        Rgba8Image::from_fn(w, h, |x, y| std::array::from_fn(|c| ((n.value(c, 0, y, x) * 60.0 + 128.0).clamp(0.0, 255.0)) as u8))
    }

    #[test]
    fn toy_target_equal_to_swapped_input_is_identity() {
        let img = noisy_image(12, 6, 1);
        let spec = SeamSpec::new(SeamDirection::Horizontal, 4);
        let target = swap_halves(&encode(&img), Axis::Width).unwrap();
        let out = make_seamless(&img, &spec, &ToyDenoiser::new(target), &Schedule::uniform(6).unwrap(), 3).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn both_directions_preserve_outside_cross() {
        let img = noisy_image(16, 16, 2);
        let spec = SeamSpec::new(SeamDirection::Both, 4);
        let toy = ToyDenoiser::new(LatentVolume::filled(Shape::new(4, 1, 16, 16), 0.5));
        let out = make_seamless(&img, &spec, &toy, &Schedule::uniform(4).unwrap(), 3).unwrap();
        let region = edited_region(16, 16, &spec).unwrap();
        let mut changed = 0;
        for y in 0..16 {
            for x in 0..16 {
                if region.get(0, y, x) {
                    changed += (out.pixel(x, y) != img.pixel(x, y)) as usize;
                } else {
                    assert_eq!(out.pixel(x, y), img.pixel(x, y), "({x},{y})");
                }
            }
        }
        assert!(changed > 0);
    }

    proptest! {
        #[test]
        fn swap_is_involution(hh in 1usize..6, hw in 1usize..6, c in 1usize..4, seed in any::<u64>()) {
            let v = SeededNoise::new(seed).volume(Shape::new(c, 1, 2 * hh, 2 * hw), (0, 0, 0));
            for axis in [Axis::Width, Axis::Height] {
                prop_assert!(swap_halves(&swap_halves(&v, axis).unwrap(), axis).unwrap().bit_eq(&v));
            }
        }

        #[test]
        fn band_counts(hh in 2usize..12, hw in 2usize..12, half_band in 1usize..4) {
            let (h, w, band) = (2 * hh, 2 * hw, 2 * half_band);
            prop_assume!(band < h && band < w);
            let count = |d| band_mask(h, w, &SeamSpec::new(d, band)).unwrap().count_ones();
            prop_assert_eq!(count(SeamDirection::Horizontal), band * h);
            prop_assert_eq!(count(SeamDirection::Vertical), band * w);
            prop_assert_eq!(count(SeamDirection::Both), band * h + band * w - band * band);
        }
    }
}
