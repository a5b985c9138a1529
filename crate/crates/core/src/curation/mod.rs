//! Dataset curation: tiering, annotation aggregation, caption sampling,
//! shot and motion splitting, histogram quality and style balancing.

mod annotation;
mod balance;
mod captions;
pub mod fixture;
mod pipeline;
mod record;
mod scorers;
pub mod video;

pub use annotation::{
    acceptance_check, aggregate_annotation, AcceptanceReport, Annotation, AnnotationTask, Verdict,
    AESTHETIC_DIMENSIONS, DEFAULT_SAMPLE_RATE,
};
pub use balance::balance_styles;
pub use captions::{sample_caption, sample_video_caption, DEFAULT_VIDEO_CAPTION_WEIGHTS, IMAGE_CAPTION_WEIGHTS};
pub use pipeline::{
    manifest_bytes, read_manifest, run, summary_bytes, write_outputs, CurationConfig, CurationRun, ManifestEntry,
    ManifestWriter, RunSummary, Sidecar, MANIFEST_FILE, SUMMARY_FILE,
};
pub use record::{
    classify_tier, AssetKind, CaptionSet, CurationRecord, Flags, Style, ThresholdConfig, Tier, AESTHETIC, CLARITY,
    GAME_STYLE, LUMINANCE, MOTION_RICHNESS,
};
pub use scorers::{GradientClarity, HistogramAesthetic, LuminanceScorer, MotionRichnessScorer, SaturationStyle, Scorer};
pub use video::{luminance_quality, motion_richness, motion_split, split_scenes, FlowParams, SceneParams};
