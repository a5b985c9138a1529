//! Counter-based Gaussian noise keyed by absolute cell coordinates.
//!
//! Every cell `(c, t, h, w)` owns a fixed position in a ChaCha8 keystream, so
//! a value never depends on which window or in which order it was generated.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::volume::{LatentVolume, Shape};

const COORD_BITS: u32 = 16;
const COORD_LIMIT: usize = 1 << COORD_BITS;
/// Keystream words consumed per cell (two `u64`s for Box-Muller).
const WORDS_PER_CELL: u128 = 4;

#[derive(Clone)]
pub struct SeededNoise {
    seed: u64,
    stream: u64,
    proto: ChaCha8Rng,
}

impl std::fmt::Debug for SeededNoise {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SeededNoise").field("seed", &self.seed).field("stream", &self.stream).finish()
    }
}

impl SeededNoise {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// An independent sub-stream under the same seed.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut proto = ChaCha8Rng::seed_from_u64(seed);
        proto.set_stream(stream);
        Self { seed, stream, proto }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Standard normal sample for one cell.
    pub fn value(&self, c: usize, t: usize, h: usize, w: usize) -> f32 {
        let mut rng = self.positioned(c, t, h, w);
        gaussian(&mut rng)
    }

    /// Noise for a `shape`-sized box whose first cell sits at absolute
    /// `(t, h, w)` = `origin`. Channels are always absolute from 0.
    pub fn volume(&self, shape: Shape, origin: (usize, usize, usize)) -> LatentVolume {
        let (t0, h0, w0) = origin;
        let mut data = Vec::with_capacity(shape.len());
        for c in 0..shape.channels {
            for t in t0..t0 + shape.frames {
                for h in h0..h0 + shape.height {
                    // consecutive w share one sequential read of the keystream
                    let mut rng = self.positioned(c, t, h, w0);
                    for _ in 0..shape.width {
                        data.push(gaussian(&mut rng));
                    }
                }
            }
        }
        LatentVolume::from_parts(shape, data)
    }

    fn positioned(&self, c: usize, t: usize, h: usize, w: usize) -> ChaCha8Rng {
        assert!(
            c < COORD_LIMIT && t < COORD_LIMIT && h < COORD_LIMIT && w < COORD_LIMIT,
            "noise coordinate ({c},{t},{h},{w}) exceeds {COORD_LIMIT}"
        );
        let key = ((c as u128) << (3 * COORD_BITS))
            | ((t as u128) << (2 * COORD_BITS))
            | ((h as u128) << COORD_BITS)
            | w as u128;
        let mut rng = self.proto.clone();
        rng.set_word_pos(key * WORDS_PER_CELL);
        rng
    }
}

/// Box-Muller transform on two 53-bit uniforms; `u1` is kept away from zero.
fn gaussian(rng: &mut ChaCha8Rng) -> f32 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * SCALE;
    let u2 = (rng.next_u64() >> 11) as f64 * SCALE;
    ((-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()) as f32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volume_matches_per_cell_values() {
        let noise = SeededNoise::new(42);
        let shape = Shape::new(2, 3, 4, 5);
        let vol = noise.volume(shape, (1, 2, 3));
        for i in 0..shape.len() {
            let (c, t, h, w) = shape.coords(i);
            assert_eq!(vol.data()[i].to_bits(), noise.value(c, t + 1, h + 2, w + 3).to_bits());
        }
    }

    #[test]
    fn windows_agree_with_whole() {
        let noise = SeededNoise::new(7);
        let whole = noise.volume(Shape::new(1, 2, 8, 8), (0, 0, 0));
        let part = noise.volume(Shape::new(1, 1, 3, 4), (1, 5, 4));
        assert!(whole.window((1, 5, 4), (1, 3, 4)).unwrap().bit_eq(&part));
    }

    #[test]
    fn seeds_and_streams_differ() {
        let a = SeededNoise::new(1).value(0, 0, 0, 0);
        let b = SeededNoise::new(2).value(0, 0, 0, 0);
        let c = SeededNoise::with_stream(1, 1).value(0, 0, 0, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn roughly_standard_normal() {
        let v = SeededNoise::new(3).volume(Shape::new(1, 1, 200, 200), (0, 0, 0));
        let n = v.data().len() as f64;
        let mean = v.data().iter().map(|&x| x as f64).sum::<f64>() / n;
        let var = v.data().iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "var {var}");
    }
}
