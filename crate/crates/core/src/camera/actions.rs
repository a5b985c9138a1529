use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use super::{orthonormalize, CameraPose, CameraTrajectory};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionKey {
    W,
    A,
    S,
    D,
    Up,
    Left,
    Down,
    Right,
    Space,
}

impl ActionKey {
    pub const ALL: [ActionKey; 9] = [
        ActionKey::W,
        ActionKey::A,
        ActionKey::S,
        ActionKey::D,
        ActionKey::Up,
        ActionKey::Left,
        ActionKey::Down,
        ActionKey::Right,
        ActionKey::Space,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActionKey::W => "W",
            ActionKey::A => "A",
            ActionKey::S => "S",
            ActionKey::D => "D",
            ActionKey::Up => "Up",
            ActionKey::Left => "Left",
            ActionKey::Down => "Down",
            ActionKey::Right => "Right",
            ActionKey::Space => "Space",
        }
    }

    /// Parses a comma- or whitespace-separated key list such as `"W,W,Left"`.
    pub fn parse_list(s: &str) -> Result<Vec<ActionKey>> {
        s.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect()
    }
}

impl fmt::Display for ActionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActionKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "w" => ActionKey::W,
            "a" => ActionKey::A,
            "s" => ActionKey::S,
            "d" => ActionKey::D,
            "up" | "↑" | "arrowup" => ActionKey::Up,
            "left" | "←" | "arrowleft" => ActionKey::Left,
            "down" | "↓" | "arrowdown" => ActionKey::Down,
            "right" | "→" | "arrowright" => ActionKey::Right,
            "space" | " " => ActionKey::Space,
            _ => return Err(Error::InvalidParam(format!("unknown action key {s:?}"))),
        })
    }
}

/// Per-frame motion constants applied when a key is held for one segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotionParams {
    /// World units per frame for W/A/S/D.
    pub speed: f64,
    /// Radians per frame for Left/Right.
    pub yaw_rate: f64,
    /// Radians per frame for Up/Down.
    pub pitch_rate: f64,
    /// Apex height of the Space arc.
    pub jump_height: f64,
    /// Frames generated per key press.
    pub segment_frames: usize,
    /// Largest allowed |pitch|; strictly below π/2.
    pub pitch_limit: f64,
}

impl Default for MotionParams {
    fn default() -> Self {
        Self {
            speed: 0.1,
            yaw_rate: std::f64::consts::PI / 64.0,
            pitch_rate: std::f64::consts::PI / 128.0,
            jump_height: 0.5,
            segment_frames: 8,
            pitch_limit: 85f64.to_radians(),
        }
    }
}

impl MotionParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParam(format!("{name} must be positive, got {v}")))
            }
        };
        positive("speed", self.speed)?;
        positive("yaw_rate", self.yaw_rate)?;
        positive("pitch_rate", self.pitch_rate)?;
        positive("pitch_limit", self.pitch_limit)?;
        if !(self.jump_height.is_finite() && self.jump_height >= 0.0) {
            return Err(Error::InvalidParam(format!("jump_height must be ≥ 0, got {}", self.jump_height)));
        }
        if self.segment_frames == 0 {
            return Err(Error::InvalidParam("segment_frames must be ≥ 1".into()));
        }
        if self.pitch_limit >= FRAC_PI_2 {
            return Err(Error::InvalidParam(format!("pitch_limit {} must be below π/2", self.pitch_limit)));
        }
        Ok(())
    }
}

/// Expands each key into `segment_frames` poses and returns the trajectory
/// including `start` as frame 0.
///
/// * W/S move along the current forward axis, A/D along the right axis.
/// * Left/Right turn about world up, Up/Down tilt about the camera's right
///   axis with |pitch| clamped to `pitch_limit`.
/// * Space lifts the camera along world up by
///   `jump_height · 4 · (k/F) · (1 − k/F)` at frame `k` of the segment and
///   lands back on the baseline at `k = F`.
pub fn fold_actions(start: &CameraPose, keys: &[ActionKey], params: &MotionParams) -> Result<CameraTrajectory> {
    if keys.is_empty() {
        return Err(Error::EmptyKeyList);
    }
    params.validate()?;
    start.intrinsics.validate()?;
    let frames = params.segment_frames;
    let mut poses = Vec::with_capacity(1 + keys.len() * frames);
    poses.push(*start);
    let mut rotation = start.rotation;
    let mut base = start.center;
    let up = Vector3::y_axis();
    for &key in keys {
        for k in 1..=frames {
            let pose = CameraPose::new(rotation, base, start.intrinsics);
            let mut lift = 0.0;
            match key {
                ActionKey::W => base += params.speed * pose.forward(),
                ActionKey::S => base -= params.speed * pose.forward(),
                ActionKey::A => base -= params.speed * pose.right(),
                ActionKey::D => base += params.speed * pose.right(),
                ActionKey::Left | ActionKey::Right => {
                    let angle = if key == ActionKey::Left { params.yaw_rate } else { -params.yaw_rate };
                    rotation = *Rotation3::from_axis_angle(&up, angle).matrix() * rotation;
                }
                ActionKey::Up | ActionKey::Down => {
                    let pitch = pose.pitch();
                    let step = if key == ActionKey::Up { params.pitch_rate } else { -params.pitch_rate };
                    let target = (pitch + step).clamp(-params.pitch_limit, params.pitch_limit);
                    rotation *= *Rotation3::from_axis_angle(&Vector3::x_axis(), target - pitch).matrix();
                }
                ActionKey::Space => {
                    let s = k as f64 / frames as f64;
                    lift = params.jump_height * 4.0 * s * (1.0 - s);
                }
            }
            rotation = orthonormalize(&rotation);
            poses.push(CameraPose::new(rotation, base + lift * up.into_inner(), start.intrinsics));
        }
    }
    Ok(CameraTrajectory::new(poses))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Intrinsics;
    use std::f64::consts::PI;

    fn start() -> CameraPose {
        CameraPose::looking_forward(Vector3::zeros(), Intrinsics::centered(16, 16, 1.2))
    }

    #[test]
    fn forward_walk() {
        let traj = fold_actions(&start(), &[ActionKey::W], &MotionParams::default()).unwrap();
        assert_eq!(traj.len(), 9);
        let end = traj.last().unwrap().center;
        assert!((end - Vector3::new(0.0, 0.0, -0.8)).norm() < 1e-12);
    }

    #[test]
    fn quarter_turn_then_walk() {
        let params = MotionParams { yaw_rate: PI / 2.0 / 8.0, ..Default::default() };
        let traj = fold_actions(&start(), &[ActionKey::Left, ActionKey::W], &params).unwrap();
        let turned = traj.poses[8];
        let walked = traj.last().unwrap();
        let expected = params.speed * 8.0 * (Rotation3::from_axis_angle(&Vector3::y_axis(), PI / 2.0) * Vector3::new(0.0, 0.0, -1.0));
        assert!((walked.center - turned.center - expected).norm() < 1e-6);
        assert!((walked.center - Vector3::new(-0.8, 0.0, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn jump_lands_on_baseline() {
        let params = MotionParams::default();
        let traj = fold_actions(&start(), &[ActionKey::Space], &params).unwrap();
        assert_eq!(traj.poses[0].center, traj.poses[8].center);
        assert!((traj.poses[4].center.y - params.jump_height).abs() < 1e-12);
        assert!(traj.poses.iter().all(|p| p.center.y >= 0.0));
    }

    #[test]
    fn opposite_keys_cancel() {
        let p = MotionParams::default();
        for (a, b) in [(ActionKey::W, ActionKey::S), (ActionKey::A, ActionKey::D), (ActionKey::Left, ActionKey::Right), (ActionKey::Up, ActionKey::Down)] {
            let traj = fold_actions(&start(), &[a, b], &p).unwrap();
            let end = traj.last().unwrap();
            assert!((end.center - start().center).norm() < 1e-6, "{a}/{b}");
            assert!((end.rotation - start().rotation).abs().max() < 1e-6, "{a}/{b}");
        }
    }

    #[test]
    fn pitch_is_clamped() {
        let p = MotionParams { pitch_rate: 0.3, ..Default::default() };
        let traj = fold_actions(&start(), &[ActionKey::Up; 4], &p).unwrap();
        assert!(traj.poses.iter().all(|q| q.pitch().abs() <= p.pitch_limit + 1e-9));
        assert!((traj.last().unwrap().pitch() - p.pitch_limit).abs() < 1e-9);
    }

    #[test]
    fn empty_keys_rejected() {
        assert!(matches!(fold_actions(&start(), &[], &MotionParams::default()), Err(Error::EmptyKeyList)));
    }

    #[test]
    fn parses_key_lists() {
        assert_eq!(
            ActionKey::parse_list("W, left ↑ Space").unwrap(),
            vec![ActionKey::W, ActionKey::Left, ActionKey::Up, ActionKey::Space]
        );
        assert!(ActionKey::parse_list("W,Q").is_err());
    }

    #[test]
    fn params_validation() {
        assert!(MotionParams { speed: 0.0, ..Default::default() }.validate().is_err());
        assert!(MotionParams { segment_frames: 0, ..Default::default() }.validate().is_err());
        assert!(MotionParams { pitch_limit: FRAC_PI_2, ..Default::default() }.validate().is_err());
    }
}
