use crate::codec::encode;
use crate::denoise::{sample_inpaint, Denoiser, Schedule};
use crate::error::{Error, Result};
use crate::raster::Rgba8Image;
use crate::volume::{BinaryMask, LatentVolume};

/// A `total_frames`-long clip whose first and last frames are both the
/// encoded `image`, bit-for-bit; only the interior is synthesized.
pub fn make_loop(
    image: &Rgba8Image,
    total_frames: usize,
    denoiser: &dyn Denoiser,
    schedule: &Schedule,
    seed: u64,
) -> Result<LatentVolume> {
    if total_frames < 3 {
        return Err(Error::TooFewFrames { frames: total_frames, min: 3 });
    }
    if image.is_empty() {
        return Err(Error::EmptyImage);
    }
    let still = encode(image);
    let s = still.shape();
    let blank = LatentVolume::zeros(s.with_frames(total_frames - 2));
    let known = LatentVolume::concat_frames(&[&still, &blank, &still])?;
    let last = total_frames - 1;
    let mask = BinaryMask::from_fn(total_frames, s.height, s.width, |t, _, _| t != 0 && t != last);
    sample_inpaint(denoiser, schedule, &known, &mask, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::{BridgeDenoiser, SeededNoise, ToyDenoiser};
    use crate::volume::Shape;

    fn image() -> Rgba8Image {
        Rgba8Image::from_fn(6, 4, |x, y| [(x * 40) as u8, (y * 60) as u8, 99, 255])
    }

    #[test]
    fn ends_match_for_three_frames() {
        let toy = ToyDenoiser::new(SeededNoise::new(1).volume(Shape::new(4, 3, 4, 6), (0, 0, 0)));
        let v = make_loop(&image(), 3, &toy, &Schedule::uniform(4).unwrap(), 0).unwrap();
        let first = v.frames(0..1).unwrap();
        assert!(first.bit_eq(&v.frames(2..3).unwrap()));
        assert!(first.bit_eq(&encode(&image())));
    }

    #[test]
    fn periodic_target_is_reproduced() {
        let t_len = 9;
        let still = encode(&image());
        // frame t = still + 0.1·sin(2πt/(T−1)), periodic with frame 0 == frame T−1
        let target = LatentVolume::from_fn(Shape::new(4, t_len, 4, 6), |c, t, h, w| {
            still.get(c, 0, h, w) + 0.1 * (std::f32::consts::TAU * t as f32 / (t_len - 1) as f32).sin() * (t % (t_len - 1) != 0) as u8 as f32
        })
        .unwrap();
        let v = make_loop(&image(), t_len, &ToyDenoiser::new(target.clone()), &Schedule::uniform(8).unwrap(), 5).unwrap();
        assert!(v.max_abs_diff(&target) <= 1e-5);
    }

    #[test]
    fn bridge_denoiser_gives_a_still_loop() {
        let v = make_loop(&image(), 5, &BridgeDenoiser, &Schedule::uniform(3).unwrap(), 0).unwrap();
        let still = encode(&image());
        for t in 0..5 {
            assert!(v.frames(t..t + 1).unwrap().max_abs_diff(&still) < 1e-5);
        }
    }

    #[test]
    fn two_frames_is_too_few() {
        let toy = ToyDenoiser::new(encode(&image()));
        assert!(matches!(
            make_loop(&image(), 2, &toy, &Schedule::uniform(1).unwrap(), 0),
            Err(Error::TooFewFrames { frames: 2, min: 3 })
        ));
    }
}
