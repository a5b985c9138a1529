use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GAME_STYLE: &str = "game_style";
pub const CLARITY: &str = "clarity";
pub const AESTHETIC: &str = "aesthetic";
pub const LUMINANCE: &str = "luminance";
pub const MOTION_RICHNESS: &str = "motion_richness";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssetKind {
    Image,
    Clip,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Style {
    #[serde(rename = "2D")]
    TwoD,
    #[serde(rename = "3D")]
    ThreeD,
    #[default]
    #[serde(rename = "other")]
    Other,
}

impl Style {
    pub fn label(self) -> &'static str {
        match self {
            Style::TwoD => "2D",
            Style::ThreeD => "3D",
            Style::Other => "other",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tier {
    Bronze,
    Gold,
    Premium,
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Flags {
    pub watermark: bool,
    pub ocr_text: bool,
    pub logo: bool,
    pub defect: bool,
    pub aigc: bool,
}

/// Caption variants. Images carry the first four; clips may add the
/// visual/motion variants and tags.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaptionSet {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub short: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub medium: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detailed: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comprehensive: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub long_visual: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub long_motion: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub short_visual: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub short_motion: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurationRecord {
    pub id: String,
    pub kind: AssetKind,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub scores: BTreeMap<String, f64>,
    /// Which scorer produced each entry of `scores`.
    pub scorers: BTreeMap<String, String>,
    #[serde(default)]
    pub flags: Flags,
    #[serde(default)]
    pub manual_pass: bool,
    #[serde(default)]
    pub style: Style,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tier: Option<Tier>,
    #[serde(default)]
    pub captions: CaptionSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_bounds: Option<(usize, usize)>,
}

impl CurationRecord {
    pub fn image(id: impl Into<String>, width: usize, height: usize) -> Self {
        Self {
            id: id.into(),
            kind: AssetKind::Image,
            width,
            height,
            frames: 1,
            scores: BTreeMap::new(),
            scorers: BTreeMap::new(),
            flags: Flags::default(),
            manual_pass: false,
            style: Style::Other,
            tier: None,
            captions: CaptionSet::default(),
            clip_bounds: None,
        }
    }

    pub fn score(&self, name: &str) -> Result<f64> {
        self.scores.get(name).copied().ok_or_else(|| Error::MissingScore(name.to_string()))
    }

    pub fn set_score(&mut self, name: &str, value: f64, scorer: &str) {
        self.scores.insert(name.to_string(), value);
        self.scorers.insert(name.to_string(), scorer.to_string());
    }

    /// True when the stored tier agrees with `classify_tier`.
    pub fn tier_consistent(&self, cfg: &ThresholdConfig) -> bool {
        classify_tier(self, cfg).map(|t| t == self.tier).unwrap_or(false)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    pub style: f64,
    pub clarity: f64,
    pub aesthetic: f64,
    pub min_side: usize,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self { style: 0.5, clarity: 0.35, aesthetic: 0.5, min_side: 1024 }
    }
}

/// Highest tier a record attains, or `None` when it fails the style gate.
pub fn classify_tier(record: &CurationRecord, cfg: &ThresholdConfig) -> Result<Option<Tier>> {
    let style = record.score(GAME_STYLE)?;
    let clarity = record.score(CLARITY)?;
    let aesthetic = record.score(AESTHETIC)?;
    if style < cfg.style {
        return Ok(None);
    }
    let gold = record.width >= cfg.min_side
        && record.height >= cfg.min_side
        && clarity >= cfg.clarity
        && aesthetic >= cfg.aesthetic
        && !record.flags.watermark
        && !record.flags.ocr_text;
    if !gold {
        return Ok(Some(Tier::Bronze));
    }
    let premium = !record.flags.defect && !record.flags.aigc && record.manual_pass;
    Ok(Some(if premium { Tier::Premium } else { Tier::Gold }))
}
