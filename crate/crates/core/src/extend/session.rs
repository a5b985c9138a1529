use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::camera::{
    compress_actions, fold_actions, parse_trajectory, write_trajectory, ActionKey, CameraPose, CameraTrajectory,
    CompressOptions, MotionParams, PlueckerField,
};
use crate::codec::encode;
use crate::container::{load_volume, save_volume};
use crate::denoise::{sample_inpaint_with, ConditionBundle, Denoiser, Schedule};
use crate::error::{Error, Result};
use crate::raster::Rgba8Image;
use crate::volume::{BinaryMask, LatentVolume};

/// Which part of the existing timeline conditions the next segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ConditionKind {
    SingleFrame,
    PreviousLatents(usize),
    FullClip,
}

impl ConditionKind {
    /// Number of head frames taken from a timeline of `history` frames.
    pub fn head_len(self, history: usize) -> Result<usize> {
        match self {
            ConditionKind::SingleFrame if history >= 1 => Ok(1),
            ConditionKind::FullClip if history >= 1 => Ok(history),
            ConditionKind::PreviousLatents(n) if n >= 1 && n <= history => Ok(n),
            _ => Err(Error::InvalidKind(format!("{self} with {history} history frames"))),
        }
    }
}

impl fmt::Display for ConditionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConditionKind::SingleFrame => f.write_str("single"),
            ConditionKind::PreviousLatents(n) => write!(f, "previous:{n}"),
            ConditionKind::FullClip => f.write_str("full"),
        }
    }
}

impl FromStr for ConditionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Self::SingleFrame),
            "full" => Ok(Self::FullClip),
            _ => s
                .strip_prefix("previous:")
                .and_then(|n| n.parse().ok())
                .map(Self::PreviousLatents)
                .ok_or_else(|| Error::InvalidKind(format!("cannot parse {s:?}; expected single, previous:N or full"))),
        }
    }
}

impl TryFrom<String> for ConditionKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ConditionKind> for String {
    fn from(k: ConditionKind) -> String {
        k.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SessionConfig {
    pub motion: MotionParams,
    pub steps: usize,
    pub seed: u64,
    pub compress: CompressOptions,
    pub kind: ConditionKind,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            motion: MotionParams::default(),
            steps: 8,
            seed: 0,
            compress: CompressOptions::default(),
            kind: ConditionKind::SingleFrame,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        self.motion.validate()?;
        Schedule::uniform(self.steps)?;
        if self.compress.spatial_factor == 0 || self.compress.temporal_factor == 0 {
            return Err(Error::InvalidParam("compression factors must be ≥ 1".into()));
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<Schedule> {
        Schedule::uniform(self.steps)
    }
}

/// One extension call: the keys pressed, the frames it produced and how it
/// was conditioned.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub keys: Vec<ActionKey>,
    pub start: usize,
    pub end: usize,
    pub kind: ConditionKind,
}

impl Segment {
    pub fn frames(&self) -> Range<usize> {
        self.start..self.end
    }
}

/// Head frames plus room for the new ones, with the model-side mask:
/// 1 marks history, 0 marks frames to denoise.
#[derive(Clone, Debug)]
pub struct HybridInput {
    pub latents: LatentVolume,
    pub mask: BinaryMask,
    head_len: usize,
}

impl HybridInput {
    pub fn build(head: &LatentVolume, new_frames: usize) -> Result<Self> {
        let s = head.shape();
        let blank = LatentVolume::zeros(s.with_frames(new_frames));
        let latents = LatentVolume::concat_frames(&[head, &blank])?;
        let head_len = s.frames;
        let mask = BinaryMask::from_fn(head_len + new_frames, s.height, s.width, |t, _, _| t < head_len);
        Ok(Self { latents, mask, head_len })
    }

    pub fn head_len(&self) -> usize {
        self.head_len
    }

    pub fn new_frames(&self) -> usize {
        self.mask.frames() - self.head_len
    }

    /// The same mask in the inpainting engine's convention (1 = synthesize).
    pub fn inpaint_mask(&self) -> BinaryMask {
        self.mask.inverted()
    }
}

#[derive(Clone, Debug)]
pub struct SessionState {
    timeline: LatentVolume,
    trajectory: CameraTrajectory,
    config: SessionConfig,
    segments: Vec<Segment>,
}

const TIMELINE_FILE: &str = "timeline.fglv";
const TRAJECTORY_FILE: &str = "trajectory.txt";
const CONFIG_FILE: &str = "config.json";
const SEGMENTS_FILE: &str = "segments.jsonl";

impl SessionState {
    /// A one-frame session holding `image` at `pose`.
    pub fn start(image: &Rgba8Image, pose: CameraPose, config: SessionConfig) -> Result<Self> {
        if image.is_empty() {
            return Err(Error::EmptyImage);
        }
        config.validate()?;
        pose.intrinsics.validate()?;
        Ok(Self {
            timeline: encode(image),
            trajectory: CameraTrajectory::new(vec![pose]),
            config,
            segments: Vec::new(),
        })
    }

    pub fn timeline(&self) -> &LatentVolume {
        &self.timeline
    }

    pub fn trajectory(&self) -> &CameraTrajectory {
        &self.trajectory
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn frame_count(&self) -> usize {
        self.timeline.shape().frames
    }

    /// Poses the next extension with `keys` would append, without changing
    /// the session.
    pub fn plan_poses(&self, keys: &[ActionKey]) -> Result<Vec<CameraPose>> {
        let last = self.trajectory.last().expect("session always has a start pose");
        let mut poses = fold_actions(last, keys, &self.config.motion)?.poses;
        poses.remove(0);
        Ok(poses)
    }

    /// The conditioning input the next extension would use.
    pub fn hybrid_input(&self, kind: ConditionKind, new_frames: usize) -> Result<HybridInput> {
        let history = self.frame_count();
        let head = kind.head_len(history)?;
        HybridInput::build(&self.timeline.frames(history - head..history)?, new_frames)
    }

    /// Appends `segment_frames · keys.len()` frames. On error the session is
    /// left untouched.
    pub fn extend(&mut self, keys: &[ActionKey], kind: ConditionKind, denoiser: &dyn Denoiser) -> Result<&Segment> {
        if keys.is_empty() {
            return Err(Error::EmptyKeyList);
        }
        let history = self.frame_count();
        let head_len = kind.head_len(history)?;
        let poses = self.plan_poses(keys)?;
        let s = self.timeline.shape();

        let field = PlueckerField::for_trajectory(&CameraTrajectory::new(poses.clone()), s.height, s.width)?;
        let actions = compress_actions(&field, &self.config.compress)?;

        let input = self.hybrid_input(kind, poses.len())?;
        let head_start = history - head_len;
        let cond = ConditionBundle { pluecker: Some(actions), ..ConditionBundle::at((head_start, 0, 0)) };
        let out = sample_inpaint_with(
            denoiser,
            &self.config.schedule()?,
            &input.latents,
            &input.inpaint_mask(),
            self.config.seed,
            cond,
        )?;
        let fresh = out.frames(head_len..head_len + poses.len())?;
        let timeline = LatentVolume::concat_frames(&[&self.timeline, &fresh])?;

        self.timeline = timeline;
        self.trajectory.poses.extend(poses);
        self.segments.push(Segment { keys: keys.to_vec(), start: history, end: self.frame_count(), kind });
        Ok(self.segments.last().unwrap())
    }

    /// Writes `timeline.fglv`, `trajectory.txt`, `config.json` and
    /// `segments.jsonl` into `dir`, creating it if needed.
    pub fn export(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_volume(&self.timeline, dir.join(TIMELINE_FILE))?;
        write_file(&dir.join(TRAJECTORY_FILE), &write_trajectory(&self.trajectory))?;
        write_file(&dir.join(CONFIG_FILE), &(serde_json::to_string_pretty(&self.config)? + "\n"))?;
        let mut log = String::new();
        for seg in &self.segments {
            log.push_str(&serde_json::to_string(seg)?);
            log.push('\n');
        }
        write_file(&dir.join(SEGMENTS_FILE), &log)
    }

    pub fn import(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let timeline = load_volume(dir.join(TIMELINE_FILE))?;
        let traj_path = dir.join(TRAJECTORY_FILE);
        let trajectory = parse_trajectory(&read_file(&traj_path)?, &traj_path.display().to_string())?;
        let config: SessionConfig = serde_json::from_str(&read_file(&dir.join(CONFIG_FILE))?)?;
        let segments = read_file(&dir.join(SEGMENTS_FILE))?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<Vec<Segment>, _>>()?;
        let state = Self { timeline, trajectory, config, segments };
        state.check_consistency()?;
        Ok(state)
    }

    fn check_consistency(&self) -> Result<()> {
        if self.timeline.shape().channels != 4 || self.frame_count() == 0 {
            return Err(Error::WrongShape { expected: "4xTxHxW timeline".into(), actual: self.timeline.shape().to_string() });
        }
        if self.trajectory.len() != self.frame_count() {
            return Err(Error::DimMismatch(format!(
                "timeline has {} frames, trajectory {}",
                self.frame_count(),
                self.trajectory.len()
            )));
        }
        let mut next = 1;
        for seg in &self.segments {
            if seg.start != next || seg.end <= seg.start {
                return Err(Error::DimMismatch(format!("segment {:?} does not continue at frame {next}", seg.frames())));
            }
            next = seg.end;
        }
        if next != self.frame_count() {
            return Err(Error::DimMismatch(format!("segments end at {next}, timeline at {}", self.frame_count())));
        }
        self.config.validate()
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Intrinsics;
    use crate::denoise::{BridgeDenoiser, SeededNoise, ToyDenoiser};
    use crate::volume::Shape;
    use nalgebra::Vector3;

    fn image() -> Rgba8Image {
        Rgba8Image::from_fn(16, 16, |x, y| [(x * 16) as u8, (y * 16) as u8, 128, 255])
    }

    fn pose() -> CameraPose {
        CameraPose::looking_forward(Vector3::new(0.0, 1.0, 0.0), Intrinsics::centered(16, 16, 1.5))
    }

    fn config() -> SessionConfig {
        SessionConfig { motion: MotionParams { segment_frames: 4, ..Default::default() }, steps: 4, ..Default::default() }
    }

    #[test]
    fn start_holds_one_frame() {
        let s = SessionState::start(&image(), pose(), config()).unwrap();
        assert_eq!(s.frame_count(), 1);
        assert_eq!(s.trajectory().len(), 1);
        let h = s.hybrid_input(ConditionKind::SingleFrame, 0).unwrap();
        assert!(h.mask.bits().iter().all(|&b| b == 1));
    }

    #[test]
    fn empty_image_rejected() {
        assert!(matches!(
            SessionState::start(&Rgba8Image::new(0, 0, vec![]).unwrap(), pose(), config()),
            Err(Error::EmptyImage)
        ));
    }

    #[test]
    fn bookkeeping_over_two_extensions() {
        let mut s = SessionState::start(&image(), pose(), config()).unwrap();
        s.extend(&[ActionKey::W, ActionKey::Left], ConditionKind::SingleFrame, &BridgeDenoiser).unwrap();
        s.extend(&[ActionKey::W, ActionKey::D], ConditionKind::SingleFrame, &BridgeDenoiser).unwrap();
        assert_eq!(s.segments().len(), 2);
        assert_eq!(s.frame_count(), 1 + 2 * 4 * 2);
        assert_eq!(s.trajectory().len(), s.frame_count());
        assert_eq!(s.segments()[1].frames(), 9..17);
    }

    #[test]
    fn invalid_kind_leaves_session_untouched() {
        let mut s = SessionState::start(&image(), pose(), config()).unwrap();
        let err = s.extend(&[ActionKey::W], ConditionKind::PreviousLatents(2), &BridgeDenoiser).unwrap_err();
        assert!(matches!(err, Error::InvalidKind(_)));
        assert!(matches!(s.extend(&[], ConditionKind::SingleFrame, &BridgeDenoiser), Err(Error::EmptyKeyList)));
        assert_eq!(s.frame_count(), 1);
        assert!(s.segments().is_empty());
    }

    #[test]
    fn toy_target_reproduced_and_history_frozen() {
        let cfg = config();
        let total = 1 + 2 * 4;
        let first = encode(&image());
        let rest = SeededNoise::new(3).volume(Shape::new(4, total - 1, 16, 16), (0, 0, 0));
        let target = LatentVolume::concat_frames(&[&first, &rest]).unwrap();
        let toy = ToyDenoiser::new(target.clone());
        let mut s = SessionState::start(&image(), pose(), cfg).unwrap();
        s.extend(&[ActionKey::W], ConditionKind::SingleFrame, &toy).unwrap();
        let before = s.timeline().clone();
        s.extend(&[ActionKey::Right], ConditionKind::PreviousLatents(3), &toy).unwrap();
        assert!(s.timeline().frames(0..5).unwrap().bit_eq(&before));
        assert!(s.timeline().max_abs_diff(&target) <= 1e-5);
    }

    #[test]
    fn head_lengths_follow_kind() {
        let mut s = SessionState::start(&image(), pose(), config()).unwrap();
        s.extend(&[ActionKey::W], ConditionKind::SingleFrame, &BridgeDenoiser).unwrap();
        for (kind, head) in [(ConditionKind::SingleFrame, 1), (ConditionKind::PreviousLatents(3), 3), (ConditionKind::FullClip, 5)] {
            let h = s.hybrid_input(kind, 4).unwrap();
            assert_eq!(h.head_len(), head);
            assert_eq!(h.new_frames(), 4);
            for t in 0..head + 4 {
                let expected = (t < head) as u8;
                assert!((0..16 * 16).all(|i| h.mask.bits()[t * 256 + i] == expected));
            }
            assert_eq!(h.inpaint_mask().count_ones(), 4 * 256);
        }
    }

    #[test]
    fn kind_text_round_trip() {
        for k in [ConditionKind::SingleFrame, ConditionKind::PreviousLatents(7), ConditionKind::FullClip] {
            assert_eq!(k.to_string().parse::<ConditionKind>().unwrap(), k);
        }
        assert!("previous:x".parse::<ConditionKind>().is_err());
        assert!(ConditionKind::PreviousLatents(0).head_len(3).is_err());
    }

    #[test]
    fn export_import_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = SessionState::start(&image(), pose(), config()).unwrap();
        s.extend(&[ActionKey::Space, ActionKey::Up], ConditionKind::FullClip, &BridgeDenoiser).unwrap();
        s.export(dir.path()).unwrap();
        let back = SessionState::import(dir.path()).unwrap();
        assert!(back.timeline().bit_eq(s.timeline()));
        assert_eq!(back.trajectory(), s.trajectory());
        assert_eq!(back.segments(), s.segments());
        assert_eq!(back.config(), s.config());
    }
}
