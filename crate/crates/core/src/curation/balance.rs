use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::record::{CurationRecord, Style, AESTHETIC};
use crate::error::{Error, Result};

/// Indices (ascending) of the records kept after trimming the majority of
/// 2D/3D down to the minority count. The majority keeps its highest
/// aesthetic scores; ties are broken by a seeded shuffle. Other styles pass
/// through.
pub fn balance_styles(records: &[CurationRecord], seed: u64) -> Result<Vec<usize>> {
    let of = |s: Style| records.iter().enumerate().filter(move |(_, r)| r.style == s).map(|(i, _)| i).collect::<Vec<_>>();
    let (two, three) = (of(Style::TwoD), of(Style::ThreeD));
    if two.is_empty() {
        return Err(Error::OneStyleMissing("2D"));
    }
    if three.is_empty() {
        return Err(Error::OneStyleMissing("3D"));
    }
    let (major, minor) = if two.len() >= three.len() { (two, three) } else { (three, two) };
    let mut scored = Vec::with_capacity(major.len());
    for &i in &major {
        scored.push((i, records[i].score(AESTHETIC)?));
    }
    scored.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal));
    let mut kept: Vec<usize> = scored[..minor.len()].iter().map(|&(i, _)| i).chain(minor).chain(of(Style::Other)).collect();
    kept.sort_unstable();
    Ok(kept)
}
