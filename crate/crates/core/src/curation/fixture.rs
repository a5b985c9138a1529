use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::annotation::{AnnotationTask, AESTHETIC_DIMENSIONS};
use super::pipeline::{Sidecar, ANNOTATIONS_FILE};
use super::record::{CaptionSet, Flags, Style, AESTHETIC, CLARITY, GAME_STYLE};
use crate::error::{Error, Result};
use crate::raster::Rgba8Image;

pub const FIXTURE_IMAGES: usize = 44;
pub const FIXTURE_CLIPS: usize = 16;
pub const FIXTURE_SEED: u64 = 2025;
const CLIP_SIDE: usize = 40;

const SIZES: [(usize, usize); 7] =
    [(640, 640), (1023, 1023), (1024, 1024), (1536, 1024), (1024, 1536), (1280, 1280), (2048, 1024)];

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

fn pick_style(rng: &mut ChaCha8Rng) -> Style {
    match rng.random_range(0..20) {
        0..11 => Style::TwoD,
        11..17 => Style::ThreeD,
        _ => Style::Other,
    }
}

fn image_captions(id: &str, complete: bool) -> CaptionSet {
    CaptionSet {
        short: complete.then(|| format!("{id}: short")),
        medium: Some(format!("{id}: medium caption")),
        detailed: Some(format!("{id}: detailed caption of the scene")),
        comprehensive: Some(format!("{id}: comprehensive caption with style, lighting and composition")),
        ..Default::default()
    }
}

/// Blocky palette art; rows repeat inside each band so the PNG stays small.
fn block_art(w: usize, h: usize, rng: &mut ChaCha8Rng) -> Rgba8Image {
    let cell = 128;
    let (cols, rows) = (w.div_ceil(cell), h.div_ceil(cell));
    let colors: Vec<[u8; 4]> = (0..cols * rows).map(|_| [rng.random(), rng.random(), rng.random(), 255]).collect();
    Rgba8Image::from_fn(w, h, |x, y| colors[(y / cell) * cols + x / cell])
}

/// Tinted smooth texture translated by `(ox, oy)`.
fn tinted(ox: i64, oy: i64, tint: [f64; 3]) -> Rgba8Image {
    Rgba8Image::from_fn(CLIP_SIDE, CLIP_SIDE, |x, y| {
        let (u, v) = ((x as i64 - ox) as f64, (y as i64 - oy) as f64);
        let l = 128.0 + 50.0 * (2.0 * PI * u / 10.0).sin() + 40.0 * (2.0 * PI * v / 13.0).cos()
            + 20.0 * (2.0 * PI * (u + v) / 17.0).sin();
        let c = |k: usize| (l * tint[k]).round().clamp(0.0, 255.0) as u8;
        [c(0), c(1), c(2), 255]
    })
}

const WARM: [f64; 3] = [1.0, 0.75, 0.45];
const COOL: [f64; 3] = [0.45, 0.75, 1.0];
const DARK: [f64; 3] = [0.06, 0.06, 0.06];

fn clip_frames(kind: usize, rng: &mut ChaCha8Rng) -> Vec<Rgba8Image> {
    let n = rng.random_range(16..=28) as i64;
    let tint = if rng.random_bool(0.5) { WARM } else { COOL };
    match kind {
        0 => (0..n).map(|_| tinted(0, 0, tint)).collect(),
        1 => (0..n).map(|t| tinted(t, 0, tint)).collect(),
        2 => (0..n).map(|t| tinted(if t <= 10 { t } else { 10 + 6 * (t - 10) }, 0, tint)).collect(),
        3 => (0..n).map(|t| if t < n / 2 { tinted(t, 0, WARM) } else { tinted(0, -t, COOL) }).collect(),
        4 => (0..n).map(|t| tinted(t, 0, DARK)).collect(),
        _ => {
            let steps = [(1, 0), (0, 1), (-1, 0), (0, -1)];
            let mut pos = (0, 0);
            (0..n)
                .map(|t| {
                    if t > 0 {
                        let s = steps[(t as usize - 1) % 4];
                        pos = (pos.0 + s.0, pos.1 + s.1);
                    }
                    tinted(pos.0, pos.1, tint)
                })
                .collect()
        }
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the deterministic 60-asset corpus: palette images of varied
/// resolution with sidecar scores, short tinted clips with pans, speed
/// changes, cuts and dark footage, plus an annotation log.
pub fn write_fixture_corpus(dir: impl AsRef<Path>, seed: u64) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for k in 0..FIXTURE_IMAGES {
        let id = format!("img-{k:03}");
        let (w, h) = SIZES[rng.random_range(0..SIZES.len())];
        block_art(w, h, &mut rng).save_png(dir.join(format!("{id}.png")))?;
        let mut side = Sidecar {
            flags: Flags {
                watermark: rng.random_bool(0.1),
                ocr_text: rng.random_bool(0.1),
                logo: rng.random_bool(0.05),
                defect: rng.random_bool(0.1),
                aigc: rng.random_bool(0.1),
            },
            manual_pass: rng.random_bool(0.7),
            style: pick_style(&mut rng),
            captions: image_captions(&id, k % 9 != 4),
            ..Default::default()
        };
        if k % 7 != 3 {
            side.scores.insert(GAME_STYLE.into(), round3(rng.random_range(0.3..1.0)));
            side.scores.insert(CLARITY.into(), round3(rng.random_range(0.2..1.0)));
            side.scores.insert(AESTHETIC.into(), round3(rng.random_range(0.3..1.0)));
        }
        write_json(&dir.join(format!("{id}.json")), &side)?;
    }

    for k in 0..FIXTURE_CLIPS {
        let id = format!("clip-{k:03}");
        let clip_dir = dir.join(&id);
        fs::create_dir_all(&clip_dir).map_err(|e| Error::io(&clip_dir, e))?;
        for (t, frame) in clip_frames(k % 6, &mut rng).iter().enumerate() {
            frame.save_png(clip_dir.join(format!("{t:04}.png")))?;
        }
        let mut captions = image_captions(&id, true);
        captions.long_visual = Some(format!("{id}: long visual caption"));
        captions.long_motion = Some(format!("{id}: long motion caption"));
        captions.short_visual = Some(format!("{id}: visual"));
        captions.short_motion = Some(format!("{id}: motion"));
        captions.tags = vec!["gameplay".into(), if k % 2 == 0 { "pan".into() } else { "static".into() }];
        let mut side = Sidecar { style: pick_style(&mut rng), captions, manual_pass: rng.random_bool(0.5), ..Default::default() };
        side.scores.insert(GAME_STYLE.into(), round3(rng.random_range(0.4..1.0)));
        write_json(&dir.join(format!("{id}.json")), &side)?;
    }

    let mut log = String::new();
    for k in 0..120 {
        let truth: u8 = rng.random_range(1..=5);
        let scores: Vec<u8> = (0..5)
            .map(|_| if rng.random_bool(0.9) { truth } else { rng.random_range(1..=5) })
            .collect();
        let reference = if rng.random_bool(0.8) { truth } else { truth.saturating_sub(1).max(1) };
        let task = AnnotationTask {
            asset_id: format!("img-{:03}", k % FIXTURE_IMAGES),
            dimension: AESTHETIC_DIMENSIONS[k % AESTHETIC_DIMENSIONS.len()].to_string(),
            scores,
            reference: Some(reference),
        };
        log.push_str(&serde_json::to_string(&task)?);
        log.push('\n');
    }
    let path = dir.join(ANNOTATIONS_FILE);
    fs::write(&path, log).map_err(|e| Error::io(&path, e))
}
