//! Line-oriented trajectory text: one frame per line,
//! `t r00 r01 r02 r10 r11 r12 r20 r21 r22 cx cy cz fx fy cx cy`, where the
//! first `cx cy cz` is the camera centre and the trailing `cx cy` the
//! principal point. Lines starting with `#` are comments.

use nalgebra::{Matrix3, Vector3};

use super::{CameraPose, CameraTrajectory, Intrinsics};
use crate::error::{Error, Result};

pub const TRAJECTORY_HEADER: &str = "# t r00 r01 r02 r10 r11 r12 r20 r21 r22 cx cy cz fx fy cx cy";

pub fn write_trajectory(traj: &CameraTrajectory) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for (t, pose) in traj.poses.iter().enumerate() {
        out.push_str(&pose_line(t, pose));
        out.push('\n');
    }
    out
}

/// One trajectory line without the trailing newline.
pub fn pose_line(t: usize, pose: &CameraPose) -> String {
    let r = &pose.rotation;
    let k = &pose.intrinsics;
    let mut fields = vec![t.to_string()];
    for i in 0..3 {
        for j in 0..3 {
            fields.push(r[(i, j)].to_string());
        }
    }
    fields.extend(pose.center.iter().map(|v| v.to_string()));
    fields.extend([k.fx, k.fy, k.cx, k.cy].iter().map(|v| v.to_string()));
    fields.join(" ")
}

/// Parses [`write_trajectory`] output; `source` names the input in errors.
pub fn parse_trajectory(text: &str, source: &str) -> Result<CameraTrajectory> {
    let mut poses = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse { path: source.to_string(), line: lineno + 1, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 17 {
            return Err(err(format!("expected 17 fields, found {}", fields.len())));
        }
        let t: usize = fields[0].parse().map_err(|e| err(format!("frame index: {e}")))?;
        if t != poses.len() {
            return Err(err(format!("frame {t} out of order, expected {}", poses.len())));
        }
        let nums = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| err(format!("{f:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(err("non-finite value".into()));
        }
        let rotation = Matrix3::from_row_slice(&nums[..9]);
        let center = Vector3::new(nums[9], nums[10], nums[11]);
        let intrinsics = Intrinsics { fx: nums[12], fy: nums[13], cx: nums[14], cy: nums[15] };
        poses.push(CameraPose::new(rotation, center, intrinsics));
    }
    Ok(CameraTrajectory::new(poses))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{fold_actions, ActionKey, MotionParams};

    #[test]
    fn text_round_trip_is_exact() {
        let start = CameraPose::from_yaw_pitch(0.3, 0.1, Vector3::new(1.0, 2.0, -3.0), Intrinsics::centered(64, 48, 1.1));
        let traj = fold_actions(&start, &[ActionKey::W, ActionKey::Left, ActionKey::Space], &MotionParams::default()).unwrap();
        let text = write_trajectory(&traj);
        assert!(text.starts_with(TRAJECTORY_HEADER));
        assert_eq!(text.lines().count(), 1 + traj.len());
        assert_eq!(parse_trajectory(&text, "mem").unwrap(), traj);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = parse_trajectory("# header\n0 1 2 3\n", "traj.txt").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let line = "1 1 0 0 0 1 0 0 0 1 0 0 0 10 10 2 2";
        assert!(matches!(parse_trajectory(line, "t").unwrap_err(), Error::Parse { line: 1, .. }));
    }
}
