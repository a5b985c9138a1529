//! Keyboard actions, 6-DoF camera poses and per-pixel Plücker ray fields.
//!
//! Conventions: right-handed world, `+y` up. A camera looks down its local
//! `−z` axis with `+x` to the right and `+y` up; `rotation` maps camera axes
//! to world axes. Yaw turns about world up, pitch about the camera's right
//! axis. Pixel rays pass through pixel centres.

mod actions;
mod pluecker;
mod trajectory_io;

pub use actions::{fold_actions, ActionKey, MotionParams};
pub use pluecker::{compress_actions, pluecker_field, CompressOptions, PlueckerField};
pub use trajectory_io::{parse_trajectory, pose_line, write_trajectory, TRAJECTORY_HEADER};

use nalgebra::{Matrix3, Rotation3, Vector3};

use crate::error::{Error, Result};
use crate::raster::Rgba8Image;

/// Pinhole intrinsics in pixels.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    /// Square pixels, principal point at the image centre, `fov_x` radians
    /// across the full width.
    pub fn centered(width: usize, height: usize, fov_x: f64) -> Self {
        let f = width as f64 / 2.0 / (fov_x / 2.0).tan();
        Self { fx: f, fy: f, cx: width as f64 / 2.0, cy: height as f64 / 2.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.fx) || !ok(self.fy) {
            return Err(Error::DegenerateIntrinsics { fx: self.fx, fy: self.fy });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraPose {
    /// Camera-to-world rotation.
    pub rotation: Matrix3<f64>,
    /// Camera centre in world coordinates.
    pub center: Vector3<f64>,
    pub intrinsics: Intrinsics,
}

impl CameraPose {
    pub fn new(rotation: Matrix3<f64>, center: Vector3<f64>, intrinsics: Intrinsics) -> Self {
        Self { rotation, center, intrinsics }
    }

    /// Identity orientation (looking down world `−z`).
    pub fn looking_forward(center: Vector3<f64>, intrinsics: Intrinsics) -> Self {
        Self::new(Matrix3::identity(), center, intrinsics)
    }

    /// Orientation from yaw (about world up, positive turns left) and pitch
    /// (positive looks up).
    pub fn from_yaw_pitch(yaw: f64, pitch: f64, center: Vector3<f64>, intrinsics: Intrinsics) -> Self {
        let r = Rotation3::from_axis_angle(&Vector3::y_axis(), yaw) * Rotation3::from_axis_angle(&Vector3::x_axis(), pitch);
        Self::new(*r.matrix(), center, intrinsics)
    }

    pub fn forward(&self) -> Vector3<f64> {
        -self.rotation.column(2).into_owned()
    }

    pub fn right(&self) -> Vector3<f64> {
        self.rotation.column(0).into_owned()
    }

    pub fn up(&self) -> Vector3<f64> {
        self.rotation.column(1).into_owned()
    }

    /// Elevation of the viewing direction above the horizon, radians.
    pub fn pitch(&self) -> f64 {
        self.forward().y.clamp(-1.0, 1.0).asin()
    }

    /// Heading about world up; 0 looks down `−z`, positive turns toward `−x`.
    pub fn yaw(&self) -> f64 {
        let f = self.forward();
        (-f.x).atan2(-f.z)
    }

    /// `max |RᵀR − I|` and `|det R − 1|`.
    pub fn orthonormality_error(&self) -> (f64, f64) {
        let r = &self.rotation;
        let gram = (r.transpose() * r - Matrix3::identity()).abs().max();
        (gram, (r.determinant() - 1.0).abs())
    }
}

/// Per-frame poses, frame 0 first.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraTrajectory {
    pub poses: Vec<CameraPose>,
}

impl CameraTrajectory {
    pub fn new(poses: Vec<CameraPose>) -> Self {
        Self { poses }
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn last(&self) -> Option<&CameraPose> {
        self.poses.last()
    }
}

/// Re-orthonormalizes a rotation by Gram–Schmidt on its first two columns;
/// the third is their cross product, so the result is a proper rotation.
pub fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let c0 = r.column(0).normalize();
    let c1 = r.column(1) - c0 * c0.dot(&r.column(1));
    let c1 = c1.normalize();
    let c2 = c0.cross(&c1);
    Matrix3::from_columns(&[c0, c1, c2])
}

/// Camera trajectory recovery from footage is provided by an external
/// reconstruction model and is not available here.
pub fn estimate_trajectory(_frames: &[Rgba8Image]) -> Result<CameraTrajectory> {
    Err(Error::NotImplemented("camera trajectory estimation from video"))
}
