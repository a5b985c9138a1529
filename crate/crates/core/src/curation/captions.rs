use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::record::CaptionSet;
use crate::error::{Error, Result};

/// Relative weights of short, medium, detailed and comprehensive captions.
pub const IMAGE_CAPTION_WEIGHTS: [u32; 4] = [1, 1, 1, 7];
pub const DEFAULT_VIDEO_CAPTION_WEIGHTS: [u32; 4] = [1, 1, 1, 1];

fn pick<'a>(slots: [(&'static str, &'a Option<String>); 4], weights: [u32; 4], rng: &mut impl Rng) -> Result<&'a str> {
    for (name, slot) in slots {
        if slot.is_none() {
            return Err(Error::IncompleteCaptionSet(name));
        }
    }
    let dist = WeightedIndex::new(weights).map_err(|e| Error::InvalidParam(format!("caption weights: {e}")))?;
    Ok(slots[dist.sample(rng)].1.as_deref().unwrap())
}

pub fn sample_caption<'a>(set: &'a CaptionSet, rng: &mut impl Rng) -> Result<&'a str> {
    pick(
        [
            ("short", &set.short),
            ("medium", &set.medium),
            ("detailed", &set.detailed),
            ("comprehensive", &set.comprehensive),
        ],
        IMAGE_CAPTION_WEIGHTS,
        rng,
    )
}

/// Draws one of long visual, long motion, short visual, short motion.
pub fn sample_video_caption<'a>(set: &'a CaptionSet, weights: [u32; 4], rng: &mut impl Rng) -> Result<&'a str> {
    pick(
        [
            ("long_visual", &set.long_visual),
            ("long_motion", &set.long_motion),
            ("short_visual", &set.short_visual),
            ("short_motion", &set.short_motion),
        ],
        weights,
        rng,
    )
}
