use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::annotation::{acceptance_check, aggregate_annotation, AcceptanceReport, Annotation, AnnotationTask, DEFAULT_SAMPLE_RATE};
use super::balance::balance_styles;
use super::captions::{sample_caption, sample_video_caption, DEFAULT_VIDEO_CAPTION_WEIGHTS};
use super::record::{classify_tier, AssetKind, CaptionSet, CurationRecord, Flags, Style, ThresholdConfig, Tier, LUMINANCE, MOTION_RICHNESS};
use super::scorers::{GradientClarity, HistogramAesthetic, LuminanceScorer, MotionRichnessScorer, SaturationStyle, Scorer};
use super::video::{motion_split, split_scenes, FlowParams, SceneParams};
use crate::error::{Error, Result};
use crate::raster::Rgba8Image;

pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
const SIDECAR_SCORER: &str = "sidecar";
const HISTOGRAM_BINS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurationConfig {
    pub seed: u64,
    pub thresholds: ThresholdConfig,
    pub scenes: SceneParams,
    pub flow: FlowParams,
    /// Sub-clips whose luminance quality falls below this are dropped.
    pub min_luminance: f64,
    pub sample_rate: f64,
    pub video_caption_weights: [u32; 4],
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            thresholds: ThresholdConfig::default(),
            scenes: SceneParams::default(),
            flow: FlowParams::default(),
            min_luminance: 0.5,
            sample_rate: DEFAULT_SAMPLE_RATE,
            video_caption_weights: DEFAULT_VIDEO_CAPTION_WEIGHTS,
        }
    }
}

/// Per-asset metadata read from `<id>.json` next to the asset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sidecar {
    pub scores: BTreeMap<String, f64>,
    pub flags: Flags,
    pub manual_pass: bool,
    pub style: Style,
    pub captions: CaptionSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub record: CurationRecord,
    /// Survives tiering and style balancing.
    pub selected: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub training_caption: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSummary {
    pub tasks: usize,
    pub valid: usize,
    pub invalid: usize,
    pub acceptance: Option<AcceptanceReport>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub assets: usize,
    pub images: usize,
    pub clips: usize,
    pub records: usize,
    pub dropped_low_luminance: usize,
    pub rejected: usize,
    /// Records at or above each tier.
    pub funnel: BTreeMap<Tier, usize>,
    pub styles_tiered: BTreeMap<String, usize>,
    pub styles_selected: BTreeMap<String, usize>,
    /// 2D share of the selected 2D+3D records.
    pub balance_ratio: Option<f64>,
    pub balance_note: Option<String>,
    pub score_histograms: BTreeMap<String, Vec<usize>>,
    pub annotations: AnnotationSummary,
}

#[derive(Clone, Debug)]
pub struct CurationRun {
    pub entries: Vec<ManifestEntry>,
    pub summary: RunSummary,
}

enum Asset {
    Image(PathBuf),
    Clip(Vec<PathBuf>),
}

struct Source {
    id: String,
    asset: Asset,
    sidecar: Sidecar,
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<Vec<_>>>()?;
    paths.sort();
    Ok(paths)
}

fn is_png(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse { path: path.display().to_string(), line: e.line(), msg: e.to_string() })
}

fn discover(corpus: &Path) -> Result<Vec<Source>> {
    let mut sources = Vec::new();
    for path in read_dir_sorted(corpus)? {
        let Some(id) = path.file_stem().and_then(|s| s.to_str()).map(str::to_string) else { continue };
        let asset = if path.is_dir() {
            let frames: Vec<_> = read_dir_sorted(&path)?.into_iter().filter(|p| is_png(p)).collect();
            if frames.is_empty() {
                continue;
            }
            Asset::Clip(frames)
        } else if is_png(&path) {
            Asset::Image(path.clone())
        } else {
            continue;
        };
        let side = path.with_file_name(format!("{id}.json"));
        let sidecar = if side.is_file() { read_json(&side)? } else { Sidecar::default() };
        sources.push(Source { id, asset, sidecar });
    }
    Ok(sources)
}

fn score_all(record: &mut CurationRecord, frames: &[Rgba8Image], sidecar: &Sidecar, scorers: &[&dyn Scorer]) -> Result<()> {
    for s in scorers {
        if sidecar.scores.contains_key(s.name()) || (frames.len() < 2 && s.name() == MOTION_RICHNESS) {
            continue;
        }
        record.set_score(s.name(), s.score(frames)?, s.id());
    }
    for (name, &v) in &sidecar.scores {
        record.set_score(name, v, SIDECAR_SCORER);
    }
    Ok(())
}

fn base_record(src: &Source, kind: AssetKind, frames: &[Rgba8Image]) -> CurationRecord {
    CurationRecord {
        kind,
        frames: frames.len(),
        flags: src.sidecar.flags,
        manual_pass: src.sidecar.manual_pass,
        style: src.sidecar.style,
        captions: src.sidecar.captions.clone(),
        ..CurationRecord::image(src.id.clone(), frames[0].width(), frames[0].height())
    }
}

/// Records for one asset plus the number of sub-clips dropped for luminance.
fn process(src: &Source, cfg: &CurationConfig) -> Result<(Vec<CurationRecord>, usize)> {
    let image_scorers: [&dyn Scorer; 3] = [&SaturationStyle, &GradientClarity, &HistogramAesthetic];
    match &src.asset {
        Asset::Image(path) => {
            let frames = [Rgba8Image::load_png(path)?];
            let mut r = base_record(src, AssetKind::Image, &frames);
            score_all(&mut r, &frames, &src.sidecar, &image_scorers)?;
            Ok((vec![r], 0))
        }
        Asset::Clip(paths) => {
            let frames = paths.iter().map(Rgba8Image::load_png).collect::<Result<Vec<_>>>()?;
            let richness = MotionRichnessScorer(cfg.flow.clone());
            let clip_scorers: [&dyn Scorer; 5] = [image_scorers[0], image_scorers[1], image_scorers[2], &LuminanceScorer, &richness];
            let mut ranges = Vec::new();
            if frames.len() < 2 {
                ranges.push((0, frames.len()));
            } else {
                for (s, e) in split_scenes(&frames, &cfg.scenes)? {
                    if e - s >= 3 {
                        ranges.extend(motion_split(&frames[s..e], &cfg.flow)?.into_iter().map(|(a, b)| (s + a, s + b)));
                    } else {
                        ranges.push((s, e));
                    }
                }
            }
            let mut out = Vec::new();
            let mut dropped = 0;
            for (s, e) in ranges {
                let part = &frames[s..e];
                let mut r = base_record(src, AssetKind::Clip, part);
                r.id = format!("{}@{s}-{e}", src.id);
                r.clip_bounds = Some((s, e));
                score_all(&mut r, part, &src.sidecar, &clip_scorers)?;
                if r.score(LUMINANCE)? < cfg.min_luminance {
                    dropped += 1;
                } else {
                    out.push(r);
                }
            }
            Ok((out, dropped))
        }
    }
}

fn read_annotations(path: &Path) -> Result<Vec<AnnotationTask>> {
    if !path.is_file() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse { path: path.display().to_string(), line: i + 1, msg: e.to_string() })
        })
        .collect()
}

fn summarize_annotations(tasks: &[AnnotationTask], cfg: &CurationConfig) -> Result<AnnotationSummary> {
    let mut summary = AnnotationSummary { tasks: tasks.len(), ..Default::default() };
    let mut pairs = Vec::new();
    for t in tasks {
        match aggregate_annotation(t)? {
            Annotation::Valid(v) => {
                summary.valid += 1;
                if let Some(r) = t.reference {
                    pairs.push((v, r));
                }
            }
            Annotation::Invalid => summary.invalid += 1,
        }
    }
    if !pairs.is_empty() {
        summary.acceptance = Some(acceptance_check(&pairs, cfg.sample_rate, cfg.seed)?);
    }
    Ok(summary)
}

fn histogram(values: impl Iterator<Item = f64>, lo: f64, hi: f64) -> Vec<usize> {
    let mut bins = vec![0; HISTOGRAM_BINS];
    for v in values {
        let k = (((v - lo) / (hi - lo)) * HISTOGRAM_BINS as f64).floor().clamp(0.0, (HISTOGRAM_BINS - 1) as f64);
        bins[k as usize] += 1;
    }
    bins
}

fn style_counts<'a>(records: impl Iterator<Item = &'a CurationRecord>) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for r in records {
        *m.entry(r.style.label().to_string()).or_insert(0) += 1;
    }
    m
}

pub fn run(corpus: impl AsRef<Path>, cfg: &CurationConfig) -> Result<CurationRun> {
    let corpus = corpus.as_ref();
    cfg.flow.validate()?;
    let sources = discover(corpus)?;
    let processed = sources.par_iter().map(|s| process(s, cfg)).collect::<Result<Vec<_>>>()?;

    let mut summary = RunSummary {
        assets: sources.len(),
        images: sources.iter().filter(|s| matches!(s.asset, Asset::Image(_))).count(),
        ..Default::default()
    };
    summary.clips = summary.assets - summary.images;
    let mut records = Vec::new();
    for (recs, dropped) in processed {
        summary.dropped_low_luminance += dropped;
        records.extend(recs);
    }
    summary.records = records.len();

    for r in &mut records {
        r.tier = classify_tier(r, &cfg.thresholds)?;
    }
    summary.rejected = records.iter().filter(|r| r.tier.is_none()).count();
    for tier in [Tier::Bronze, Tier::Gold, Tier::Premium] {
        summary.funnel.insert(tier, records.iter().filter(|r| r.tier >= Some(tier)).count());
    }

    let tiered: Vec<usize> = (0..records.len()).filter(|&i| records[i].tier.is_some()).collect();
    let tiered_records: Vec<CurationRecord> = tiered.iter().map(|&i| records[i].clone()).collect();
    summary.styles_tiered = style_counts(tiered_records.iter());
    let mut selected = vec![false; records.len()];
    match balance_styles(&tiered_records, cfg.seed) {
        Ok(kept) => kept.into_iter().for_each(|k| selected[tiered[k]] = true),
        Err(e @ Error::OneStyleMissing(_)) => {
            summary.balance_note = Some(format!("balancing skipped: {e}"));
            tiered.iter().for_each(|&i| selected[i] = true);
        }
        Err(e) => return Err(e),
    }
    summary.styles_selected = style_counts(records.iter().zip(&selected).filter(|(_, &s)| s).map(|(r, _)| r));
    let n2 = summary.styles_selected.get("2D").copied().unwrap_or(0);
    let n3 = summary.styles_selected.get("3D").copied().unwrap_or(0);
    if n2 + n3 > 0 {
        summary.balance_ratio = Some(n2 as f64 / (n2 + n3) as f64);
    }

    let names: Vec<String> = records.iter().flat_map(|r| r.scores.keys().cloned()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    for name in names {
        let hi = if name == MOTION_RICHNESS { 1.5 * cfg.flow.fps } else { 1.0 };
        summary.score_histograms.insert(name.clone(), histogram(records.iter().filter_map(|r| r.scores.get(&name).copied()), 0.0, hi));
    }
    summary.annotations = summarize_annotations(&read_annotations(&corpus.join(ANNOTATIONS_FILE))?, cfg)?;

    let entries = records
        .into_iter()
        .zip(selected)
        .enumerate()
        .map(|(k, (record, selected))| {
            let training_caption = selected.then(|| training_caption(&record, k, cfg)).flatten();
            ManifestEntry { record, selected, training_caption }
        })
        .collect();
    Ok(CurationRun { entries, summary })
}

fn training_caption(record: &CurationRecord, index: usize, cfg: &CurationConfig) -> Option<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let caps = &record.captions;
    let drawn = match record.kind {
        AssetKind::Clip if caps.long_visual.is_some() => sample_video_caption(caps, cfg.video_caption_weights, &mut rng),
        _ => sample_caption(caps, &mut rng),
    };
    drawn.ok().map(str::to_string)
}

/// Appends manifest lines one record at a time.
pub struct ManifestWriter<W: Write> {
    out: W,
}

impl<W: Write> ManifestWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn append(&mut self, entry: &ManifestEntry) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.out, entry)?;
        self.out.write_all(b"\n")
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn manifest_bytes(entries: &[ManifestEntry]) -> Vec<u8> {
    let mut w = ManifestWriter::new(Vec::new());
    for e in entries {
        w.append(e).expect("writing to memory");
    }
    w.finish().expect("writing to memory")
}

pub fn summary_bytes(summary: &RunSummary) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(summary)?;
    v.push(b'\n');
    Ok(v)
}

/// Writes `manifest.jsonl` and `summary.json` into `out_dir`.
pub fn write_outputs(run: &CurationRun, out_dir: impl AsRef<Path>) -> Result<()> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(MANIFEST_FILE);
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = ManifestWriter::new(BufWriter::new(file));
    for e in &run.entries {
        w.append(e).map_err(|e| Error::io(&path, e))?;
    }
    w.finish().map_err(|e| Error::io(&path, e))?;
    let path = dir.join(SUMMARY_FILE);
    fs::write(&path, summary_bytes(&run.summary)?).map_err(|e| Error::io(&path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Parse { path: path.display().to_string(), line: i + 1, msg: e.to_string() }))
        .collect()
}
