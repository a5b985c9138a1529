//! Identity pixel/latent codec: one latent channel per RGBA byte, scaled to `[0, 1]`.

use crate::error::{Error, Result};
use crate::raster::Rgba8Image;
use crate::volume::{LatentVolume, Shape};

/// Maps each byte `b` to `b / 255`. Output shape is `4 × 1 × H × W`.
pub fn encode(image: &Rgba8Image) -> LatentVolume {
    let (w, h) = (image.width(), image.height());
    let shape = Shape::new(4, 1, h, w);
    let mut data = vec![0.0f32; shape.len()];
    for (i, px) in image.pixels().chunks_exact(4).enumerate() {
        for (c, &b) in px.iter().enumerate() {
            data[c * h * w + i] = b as f32 / 255.0;
        }
    }
    LatentVolume::from_parts(shape, data)
}

/// Inverse of [`encode`]: `round(clamp(r, 0, 1) · 255)` per cell.
pub fn decode(vol: &LatentVolume) -> Result<Rgba8Image> {
    let s = vol.shape();
    if s.channels != 4 || s.frames != 1 {
        return Err(Error::WrongShape { expected: "4x1xHxW".into(), actual: s.to_string() });
    }
    decode_frame(vol, 0)
}

/// Decodes one frame of a 4-channel video volume.
pub fn decode_frame(vol: &LatentVolume, frame: usize) -> Result<Rgba8Image> {
    let s = vol.shape();
    if s.channels != 4 || frame >= s.frames {
        return Err(Error::WrongShape {
            expected: format!("4 channels with frame {frame}"),
            actual: s.to_string(),
        });
    }
    Ok(Rgba8Image::from_fn(s.width, s.height, |x, y| {
        std::array::from_fn(|c| to_byte(vol.get(c, frame, y, x)))
    }))
}

/// Encodes equally sized images as consecutive frames of one volume.
pub fn encode_frames(frames: &[Rgba8Image]) -> Result<LatentVolume> {
    let encoded: Vec<LatentVolume> = frames.iter().map(encode).collect();
    let refs: Vec<&LatentVolume> = encoded.iter().collect();
    LatentVolume::concat_frames(&refs)
}

#[inline]
fn to_byte(r: f32) -> u8 {
    (r.clamp(0.0, 1.0) * 255.0).round() as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn red_pixel() {
        let img = Rgba8Image::new(1, 1, vec![255, 0, 0, 255]).unwrap();
        let v = encode(&img);
        assert_eq!(v.shape(), Shape::new(4, 1, 1, 1));
        assert_eq!(v.data(), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(decode(&v).unwrap(), img);
    }

    #[test]
    fn zero_image() {
        let v = encode(&Rgba8Image::filled(2, 2, [0; 4]));
        assert_eq!(v.shape(), Shape::new(4, 1, 2, 2));
        assert!(v.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn decode_rounds_and_clamps() {
        let v = LatentVolume::new(Shape::new(4, 1, 1, 1), vec![0.5, -0.2, 1.7, 1.0]).unwrap();
        assert_eq!(decode(&v).unwrap().pixels(), &[128, 0, 255, 255]);
    }

    #[test]
    fn decode_rejects_wrong_shape() {
        let v = LatentVolume::zeros(Shape::new(3, 1, 2, 2));
        assert!(matches!(decode(&v), Err(Error::WrongShape { .. })));
        let v = LatentVolume::zeros(Shape::new(4, 2, 2, 2));
        assert!(matches!(decode(&v), Err(Error::WrongShape { .. })));
    }

    #[test]
    fn every_byte_round_trips() {
        let img = Rgba8Image::from_fn(64, 1, |x, _| {
            let b = (x * 4) as u8;
            [b, b + 1, b + 2, b + 3]
        });
        assert_eq!(decode(&encode(&img)).unwrap(), img);
    }

    proptest! {
        #[test]
        fn codec_round_trip(w in 1usize..12, h in 1usize..12, seed in any::<u64>()) {
            let mut state = seed;
            let img = Rgba8Image::from_fn(w, h, |_, _| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 32).to_le_bytes()[..4].try_into().unwrap()
            });
            prop_assert_eq!(decode(&encode(&img)).unwrap(), img);
        }
    }
}
