use nalgebra::Vector3;

use super::{CameraPose, CameraTrajectory};
use crate::error::{Error, Result};
use crate::volume::{LatentVolume, Shape};

/// Per-pixel ray lines, 6 channels ordered `(m_x, m_y, m_z, d_x, d_y, d_z)`
/// with unit direction `d` and moment `m = center × d`. Stored in f64,
/// `(c, t, h, w)` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PlueckerField {
    frames: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl PlueckerField {
    pub fn for_trajectory(traj: &CameraTrajectory, height: usize, width: usize) -> Result<Self> {
        let fields = traj.poses.iter().map(|p| pluecker_field(p, height, width)).collect::<Result<Vec<_>>>()?;
        Ok(Self::stack(&fields))
    }

    /// Concatenates single- or multi-frame fields of equal size along time.
    pub fn stack(parts: &[PlueckerField]) -> Self {
        let (height, width) = parts.first().map_or((0, 0), |p| (p.height, p.width));
        assert!(parts.iter().all(|p| (p.height, p.width) == (height, width)), "field sizes differ");
        let frames = parts.iter().map(|p| p.frames).sum();
        let mut data = Vec::with_capacity(6 * frames * height * width);
        for c in 0..6 {
            for p in parts {
                let plane = p.frames * height * width;
                data.extend_from_slice(&p.data[c * plane..(c + 1) * plane]);
            }
        }
        Self { frames, height, width, data }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, c: usize, t: usize, h: usize, w: usize) -> f64 {
        self.data[((c * self.frames + t) * self.height + h) * self.width + w]
    }

    /// `(m, d)` for one pixel.
    pub fn line(&self, t: usize, h: usize, w: usize) -> (Vector3<f64>, Vector3<f64>) {
        let v = |c| self.get(c, t, h, w);
        (Vector3::new(v(0), v(1), v(2)), Vector3::new(v(3), v(4), v(5)))
    }

    /// Narrows to f32 for the FGLV container.
    pub fn to_volume(&self) -> LatentVolume {
        let shape = Shape::new(6, self.frames, self.height, self.width);
        LatentVolume::new(shape, self.data.iter().map(|&v| v as f32).collect()).expect("finite by construction")
    }
}

/// Plücker embedding of every pixel ray of `pose` on an `height × width` grid.
///
/// Pixel `(u, v)` (column, row) looks along
/// `R · ((u + ½ − cx)/fx, −(v + ½ − cy)/fy, −1)`, i.e. image rows grow
/// downward while camera `+y` points up.
pub fn pluecker_field(pose: &CameraPose, height: usize, width: usize) -> Result<PlueckerField> {
    pose.intrinsics.validate()?;
    let k = pose.intrinsics;
    let plane = height * width;
    let mut data = vec![0.0; 6 * plane];
    for v in 0..height {
        for u in 0..width {
            let cam = Vector3::new((u as f64 + 0.5 - k.cx) / k.fx, -(v as f64 + 0.5 - k.cy) / k.fy, -1.0);
            let d = (pose.rotation * cam).normalize();
            let m = pose.center.cross(&d);
            let i = v * width + u;
            for (c, value) in m.iter().chain(d.iter()).enumerate() {
                data[c * plane + i] = *value;
            }
        }
    }
    Ok(PlueckerField { frames: 1, height, width, data })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompressOptions {
    pub spatial_factor: usize,
    pub temporal_factor: usize,
    /// Replicate the last row/column/frame up to the next multiple of the
    /// factor instead of rejecting the shape.
    pub pad: bool,
    /// Model the untrained encoder: emit zeros of the contracted shape.
    pub zero_init: bool,
}

impl Default for CompressOptions {
    fn default() -> Self {
        Self { spatial_factor: 8, temporal_factor: 4, pad: true, zero_init: false }
    }
}

/// Average-pools the field over `temporal × spatial × spatial` blocks,
/// producing `(6, ⌈F/ft⌉, ⌈H/fs⌉, ⌈W/fs⌉)` (exact division when padding is off).
pub fn compress_actions(field: &PlueckerField, opts: &CompressOptions) -> Result<LatentVolume> {
    let (fs, ft) = (opts.spatial_factor, opts.temporal_factor);
    if fs == 0 || ft == 0 {
        return Err(Error::InvalidParam(format!("compression factors must be ≥ 1, got fs={fs} ft={ft}")));
    }
    let axes = [("frames", field.frames, ft), ("height", field.height, fs), ("width", field.width, fs)];
    if !opts.pad {
        for (axis, len, factor) in axes {
            if len % factor != 0 {
                return Err(Error::NonDivisibleShape { axis, len, factor });
            }
        }
    }
    let [of, oh, ow] = axes.map(|(_, len, factor)| len.div_ceil(factor));
    let shape = Shape::new(6, of, oh, ow);
    if opts.zero_init {
        return Ok(LatentVolume::zeros(shape));
    }
    let count = (ft * fs * fs) as f64;
    let mut data = Vec::with_capacity(shape.len());
    for c in 0..6 {
        for t in 0..of {
            for h in 0..oh {
                for w in 0..ow {
                    let mut sum = 0.0;
                    for dt in 0..ft {
                        let st = (t * ft + dt).min(field.frames - 1);
                        for dh in 0..fs {
                            let sh = (h * fs + dh).min(field.height - 1);
                            for dw in 0..fs {
                                let sw = (w * fs + dw).min(field.width - 1);
                                sum += field.get(c, st, sh, sw);
                            }
                        }
                    }
                    data.push((sum / count) as f32);
                }
            }
        }
    }
    LatentVolume::new(shape, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Intrinsics;
    use nalgebra::Matrix3;

    fn pose(center: Vector3<f64>) -> CameraPose {
        CameraPose::new(Matrix3::identity(), center, Intrinsics::centered(4, 4, 1.0))
    }

    #[test]
    fn origin_has_zero_moment() {
        let f = pluecker_field(&pose(Vector3::zeros()), 4, 4).unwrap();
        for c in 0..3 {
            for h in 0..4 {
                for w in 0..4 {
                    assert_eq!(f.get(c, 0, h, w), 0.0);
                }
            }
        }
    }

    #[test]
    fn moment_by_hand() {
        // 2×2 grid with principal point at the grid centre has no exactly
        // central pixel; use a 1×1 grid whose only ray is the optical axis.
        let p = CameraPose::new(Matrix3::identity(), Vector3::new(1.0, 0.0, 0.0), Intrinsics { fx: 1.0, fy: 1.0, cx: 0.5, cy: 0.5 });
        let f = pluecker_field(&p, 1, 1).unwrap();
        let (m, d) = f.line(0, 0, 0);
        assert!((d - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-15);
        assert!((m - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn rows_point_down_columns_point_right() {
        let f = pluecker_field(&pose(Vector3::zeros()), 4, 4).unwrap();
        let (_, top_left) = f.line(0, 0, 0);
        assert!(top_left.x < 0.0 && top_left.y > 0.0 && top_left.z < 0.0);
    }

    #[test]
    fn degenerate_intrinsics() {
        let mut p = pose(Vector3::zeros());
        p.intrinsics.fy = 0.0;
        assert!(matches!(pluecker_field(&p, 2, 2), Err(Error::DegenerateIntrinsics { .. })));
    }

    fn constant_field(frames: usize, h: usize, w: usize) -> PlueckerField {
        PlueckerField { frames, height: h, width: w, data: (0..6).flat_map(|c| vec![c as f64; frames * h * w]).collect() }
    }

    #[test]
    fn pooling_preserves_constants() {
        let opts = CompressOptions { spatial_factor: 4, temporal_factor: 2, pad: false, zero_init: false };
        let v = compress_actions(&constant_field(8, 16, 8), &opts).unwrap();
        assert_eq!(v.shape(), Shape::new(6, 4, 4, 2));
        for c in 0..6 {
            assert!(v.window((0, 0, 0), (4, 4, 2)).unwrap().data()[c * 32..(c + 1) * 32].iter().all(|&x| x == c as f32));
        }
    }

    #[test]
    fn pooling_by_hand() {
        let mut f = constant_field(1, 2, 2);
        for (i, v) in [0.0, 1.0, 2.0, 3.0].into_iter().enumerate() {
            f.data[i] = v;
        }
        let opts = CompressOptions { spatial_factor: 2, temporal_factor: 1, pad: false, zero_init: false };
        assert_eq!(compress_actions(&f, &opts).unwrap().get(0, 0, 0, 0), 1.5);
    }

    #[test]
    fn zero_init_shape() {
        let opts = CompressOptions { zero_init: true, ..Default::default() };
        let v = compress_actions(&constant_field(8, 64, 64), &opts).unwrap();
        assert_eq!(v.shape(), Shape::new(6, 2, 8, 8));
        assert!(v.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn non_divisible_without_padding() {
        let opts = CompressOptions { pad: false, ..Default::default() };
        assert!(matches!(
            compress_actions(&constant_field(6, 64, 64), &opts),
            Err(Error::NonDivisibleShape { axis: "frames", len: 6, factor: 4 })
        ));
        let padded = compress_actions(&constant_field(6, 60, 64), &CompressOptions::default()).unwrap();
        assert_eq!(padded.shape(), Shape::new(6, 2, 8, 8));
        assert!(padded.data()[..128].iter().all(|&x| x == 0.0));
    }
}
