use nalgebra::Vector3;

use forge_core::camera::{CameraPose, Intrinsics};
use forge_core::Rgba8Image;

/// The procedural scene drawn behind every steering preview: a square
/// point lattice on the ground plane `y = 0` and the horizon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scene {
    /// Lattice spans `-half_extent..=half_extent` on x and z.
    pub half_extent: i32,
    pub spacing: f64,
    /// Output pixels per intrinsics pixel.
    pub scale: usize,
    pub sky: [u8; 4],
    pub ground: [u8; 4],
    pub horizon: [u8; 4],
}

impl Default for Scene {
    fn default() -> Self {
        Self {
            half_extent: 10,
            spacing: 1.0,
            scale: 1,
            sky: [58, 82, 120, 255],
            ground: [46, 52, 40, 255],
            horizon: [210, 210, 200, 255],
        }
    }
}

/// Continuous image coordinates of a world point, or `None` behind the
/// camera. Pixel `(u, v)` covers `[u, u+1) × [v, v+1)`.
pub fn project(pose: &CameraPose, point: &Vector3<f64>) -> Option<(f64, f64)> {
    let q = pose.rotation.transpose() * (point - pose.center);
    project_camera(&pose.intrinsics, &q)
}

fn project_camera(k: &Intrinsics, q: &Vector3<f64>) -> Option<(f64, f64)> {
    let depth = -q.z;
    (depth > 1e-9).then(|| (k.cx + k.fx * q.x / depth, k.cy - k.fy * q.y / depth))
}

fn lattice_color(i: i32, j: i32) -> [u8; 4] {
    if i == 0 && j == 0 {
        [235, 70, 60, 255]
    } else if i == 0 || j == 0 {
        [250, 210, 90, 255]
    } else if (i + j) % 2 == 0 {
        [235, 235, 235, 255]
    } else {
        [160, 200, 235, 255]
    }
}

pub fn render_preview(pose: &CameraPose, scene: &Scene) -> Rgba8Image {
    let s = scene.scale.max(1) as f64;
    let k = Intrinsics { fx: pose.intrinsics.fx * s, fy: pose.intrinsics.fy * s, cx: pose.intrinsics.cx * s, cy: pose.intrinsics.cy * s };
    let (width, height) = (((2.0 * k.cx).round() as usize).max(1), ((2.0 * k.cy).round() as usize).max(1));
    let r = pose.rotation;
    let mut img = Rgba8Image::from_fn(width, height, |u, v| {
        let d = r * Vector3::new((u as f64 + 0.5 - k.cx) / k.fx, -(v as f64 + 0.5 - k.cy) / k.fy, -1.0);
        if d.y > 0.0 { scene.sky } else { scene.ground }
    });
    let plot = |img: &mut Rgba8Image, (x, y): (f64, f64), radius: i64, color: [u8; 4]| {
        let (px, py) = (x.floor() as i64, y.floor() as i64);
        for yy in py - radius..=py + radius {
            for xx in px - radius..=px + radius {
                if (0..width as i64).contains(&xx) && (0..height as i64).contains(&yy) {
                    img.put_pixel(xx as usize, yy as usize, color);
                }
            }
        }
    };

    for step in 0..3600 {
        let a = step as f64 * std::f64::consts::TAU / 3600.0;
        let q = r.transpose() * Vector3::new(a.cos(), 0.0, a.sin());
        if let Some(p) = project_camera(&k, &q) {
            plot(&mut img, p, 0, scene.horizon);
        }
    }

    let mut points: Vec<(f64, i32, i32, (f64, f64))> = Vec::new();
    for i in -scene.half_extent..=scene.half_extent {
        for j in -scene.half_extent..=scene.half_extent {
            let world = Vector3::new(i as f64 * scene.spacing, 0.0, j as f64 * scene.spacing);
            let q = r.transpose() * (world - pose.center);
            if let Some(p) = project_camera(&k, &q) {
                points.push((-q.z, i, j, p));
            }
        }
    }
    // far first so nearer points overwrite them
    points.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    for (depth, i, j, p) in points {
        let radius = (s * 2.0 / depth).round().clamp(0.0, 3.0 * s) as i64;
        plot(&mut img, p, radius, lattice_color(i, j));
    }
    img
}
