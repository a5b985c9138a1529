use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use forge_core::camera::{CompressOptions, MotionParams};
use forge_core::curation::CurationConfig;
use forge_core::extend::{ConditionKind, SessionConfig};
use forge_core::seamless::SeamDirection;
use forge_core::tiled::{BlendMode, Extent3, TileParams, DEFAULT_OVERLAP, DEFAULT_TILE};

use crate::CliError;

/// Everything a run reads, resolved from defaults, an optional TOML file
/// and command-line flags, in that order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub steps: usize,
    pub paths: PathsConfig,
    pub seamless: SeamlessConfig,
    pub upscale: UpscaleConfig,
    #[serde(rename = "loop")]
    pub looping: LoopConfig,
    pub motion: MotionParams,
    pub compress: CompressOptions,
    pub session: SessionSection,
    pub curation: CurationConfig,
    pub serve: ServeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            steps: 8,
            paths: PathsConfig::default(),
            seamless: SeamlessConfig::default(),
            upscale: UpscaleConfig::default(),
            looping: LoopConfig::default(),
            motion: MotionParams::default(),
            compress: CompressOptions::default(),
            session: SessionSection::default(),
            curation: CurationConfig::default(),
            serve: ServeConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeamlessConfig {
    pub direction: SeamDirection,
    pub band: usize,
}

impl Default for SeamlessConfig {
    fn default() -> Self {
        Self { direction: SeamDirection::Horizontal, band: 16 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UpscaleConfig {
    pub scale: usize,
    pub tile: Extent3,
    pub overlap: Extent3,
    pub blend: BlendMode,
}

impl Default for UpscaleConfig {
    fn default() -> Self {
        Self { scale: 2, tile: DEFAULT_TILE, overlap: DEFAULT_OVERLAP, blend: BlendMode::Uniform }
    }
}

impl UpscaleConfig {
    pub fn tile_params(&self) -> TileParams {
        TileParams { tile: self.tile, overlap: self.overlap, blend: self.blend }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    pub frames: usize,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self { frames: 33 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionSection {
    pub kind: ConditionKind,
    /// Horizontal field of view of new sessions, radians.
    pub fov: f64,
    /// Camera height above the ground plane for new sessions.
    pub eye_height: f64,
}

impl Default for SessionSection {
    fn default() -> Self {
        Self { kind: ConditionKind::SingleFrame, fov: 90f64.to_radians(), eye_height: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub host: String,
    pub port: u16,
    pub queue_depth: usize,
    pub session_root: PathBuf,
    /// Preview renders are this many times the session resolution.
    pub preview_scale: usize,
    /// Directory of static browser assets served over plain HTTP GET.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub static_dir: Option<PathBuf>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 7878,
            queue_depth: 32,
            session_root: PathBuf::from("sessions"),
            preview_scale: 2,
            static_dir: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, source: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("{source}: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Session settings derived from the shared seed, steps and motion.
    pub fn session_config(&self) -> SessionConfig {
        SessionConfig {
            motion: self.motion,
            steps: self.steps,
            seed: self.seed,
            compress: self.compress,
            kind: self.session.kind,
        }
    }

    /// Curation settings with the run seed applied.
    pub fn curation_config(&self) -> CurationConfig {
        CurationConfig { seed: self.seed, ..self.curation.clone() }
    }
}
