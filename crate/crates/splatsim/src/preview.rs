//! Minimal CPU splat compositor for eyeballing frames.
//!
//! Each Gaussian is projected through a pinhole camera, its covariance pushed
//! forward with the projection Jacobian, and the resulting 2D footprints are
//! alpha-composited back to front. This is a debugging aid, not a renderer:
//! no spherical-harmonics view dependence (DC term only), no tile binning.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2, Vector3};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::splat::GaussianScene;

/// DC spherical-harmonics basis constant; color = dc * C0 + 0.5.
const SH_C0: f32 = 0.282_094_8;
/// Screen-space dilation added to the projected covariance diagonal, px^2.
const DILATION: f64 = 0.1;

fn default_up() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}
fn default_fov() -> f64 {
    60.0
}
fn default_width() -> u32 {
    640
}
fn default_height() -> u32 {
    480
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreviewCamera {
    pub position: [f64; 3],
    pub look_at: [f64; 3],
    #[serde(default = "default_up")]
    pub up: [f64; 3],
    /// Vertical field of view, degrees.
    #[serde(default = "default_fov")]
    pub fov: f64,
    #[serde(default = "default_width")]
    pub width: u32,
    #[serde(default = "default_height")]
    pub height: u32,
    /// Background color, linear RGB in [0, 1].
    #[serde(default)]
    pub background: [f32; 3],
}

pub fn read_camera(path: &std::path::Path) -> Result<PreviewCamera> {
    let text = std::fs::read_to_string(path)?;
    let cam: PreviewCamera = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    cam.validate()?;
    Ok(cam)
}

impl PreviewCamera {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..180.0).contains(&self.fov) || self.fov == 0.0 {
            return Err(Error::Config("camera fov must be in (0, 180)".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("camera resolution must be nonzero".into()));
        }
        let fwd = Vector3::from(self.look_at) - Vector3::from(self.position);
        if fwd.norm() == 0.0 {
            return Err(Error::Config("camera position equals look_at".into()));
        }
        if fwd.normalize().cross(&Vector3::from(self.up)).norm() < 1e-9 {
            return Err(Error::Config("camera up is parallel to the view axis".into()));
        }
        Ok(())
    }

    /// World-to-camera rotation; rows are (right, up, forward).
    fn basis(&self) -> Matrix3<f64> {
        let forward = (Vector3::from(self.look_at) - Vector3::from(self.position)).normalize();
        let right = forward.cross(&Vector3::from(self.up)).normalize();
        let up = right.cross(&forward);
        Matrix3::from_rows(&[right.transpose(), up.transpose(), forward.transpose()])
    }

    fn focal(&self) -> f64 {
        self.height as f64 / (2.0 * (self.fov.to_radians() / 2.0).tan())
    }
}

struct Footprint {
    depth: f64,
    mean_world: Vector3<f64>,
    center: Vector2<f64>,
    inv_cov: Matrix2<f64>,
    radius: f64,
    color: [f32; 3],
    opacity: f64,
}

/// Render a scene through the camera into an RGB image.
pub fn render_preview(scene: &GaussianScene, cam: &PreviewCamera) -> Result<image::RgbImage> {
    cam.validate()?;
    let w_mat = cam.basis();
    let pos = Vector3::from(cam.position);
    let f = cam.focal();
    let (w, h) = (cam.width as f64, cam.height as f64);

    let mut footprints: Vec<Footprint> = Vec::with_capacity(scene.gaussians.len());
    for g in &scene.gaussians {
        let c = w_mat * (g.mean - pos);
        if c.z <= 1e-6 {
            continue; // behind the camera
        }
        let u = f * c.x / c.z + w / 2.0;
        let v = -f * c.y / c.z + h / 2.0;
        // projection Jacobian at the mean, pixel flip folded into row 2
        let j = Matrix2x3::new(
            f / c.z,
            0.0,
            -f * c.x / (c.z * c.z),
            0.0,
            -f / c.z,
            f * c.y / (c.z * c.z),
        );
        let cov_cam = w_mat * g.covariance() * w_mat.transpose();
        let mut cov2 = j * cov_cam * j.transpose();
        cov2[(0, 0)] += DILATION;
        cov2[(1, 1)] += DILATION;
        let det = cov2.determinant();
        if det <= 0.0 {
            continue;
        }
        let inv_cov = Matrix2::new(cov2[(1, 1)], -cov2[(0, 1)], -cov2[(1, 0)], cov2[(0, 0)]) / det;
        // 3-sigma extent from the larger eigenvalue
        let mid = 0.5 * (cov2[(0, 0)] + cov2[(1, 1)]);
        let disc = (mid * mid - det).max(0.0).sqrt();
        let radius = 3.0 * (mid + disc).sqrt();
        if u + radius < 0.0 || u - radius >= w || v + radius < 0.0 || v - radius >= h {
            continue;
        }
        let color = [
            (SH_C0 * g.sh_dc[0] + 0.5).clamp(0.0, 1.0),
            (SH_C0 * g.sh_dc[1] + 0.5).clamp(0.0, 1.0),
            (SH_C0 * g.sh_dc[2] + 0.5).clamp(0.0, 1.0),
        ];
        footprints.push(Footprint {
            depth: c.z,
            mean_world: g.mean,
            center: Vector2::new(u, v),
            inv_cov,
            radius,
            color,
            opacity: g.opacity,
        });
    }

    // back to front; mean coordinates break depth ties so input order never
    // changes the image
    footprints.sort_by(|a, b| {
        b.depth
            .total_cmp(&a.depth)
            .then(b.mean_world.x.total_cmp(&a.mean_world.x))
            .then(b.mean_world.y.total_cmp(&a.mean_world.y))
            .then(b.mean_world.z.total_cmp(&a.mean_world.z))
    });

    let mut buf = vec![[cam.background[0], cam.background[1], cam.background[2]];
        (cam.width * cam.height) as usize];
    for fp in &footprints {
        let x0 = ((fp.center.x - fp.radius).floor().max(0.0)) as u32;
        let x1 = ((fp.center.x + fp.radius).ceil().min(w - 1.0)) as u32;
        let y0 = ((fp.center.y - fp.radius).floor().max(0.0)) as u32;
        let y1 = ((fp.center.y + fp.radius).ceil().min(h - 1.0)) as u32;
        for py in y0..=y1 {
            for px in x0..=x1 {
                let d = Vector2::new(px as f64 + 0.5, py as f64 + 0.5) - fp.center;
                let power = -0.5 * (d.transpose() * fp.inv_cov * d)[(0, 0)];
                if power < -4.5 {
                    continue; // beyond 3 sigma
                }
                let alpha = (fp.opacity * power.exp()).min(0.99) as f32;
                if alpha < 1.0 / 255.0 {
                    continue;
                }
                let px_buf = &mut buf[(py * cam.width + px) as usize];
                for ch in 0..3 {
                    px_buf[ch] = alpha * fp.color[ch] + (1.0 - alpha) * px_buf[ch];
                }
            }
        }
    }

    let mut img = image::RgbImage::new(cam.width, cam.height);
    for (i, px) in buf.iter().enumerate() {
        let x = (i as u32) % cam.width;
        let y = (i as u32) / cam.width;
        img.put_pixel(
            x,
            y,
            image::Rgb([
                (px[0] * 255.0).round() as u8,
                (px[1] * 255.0).round() as u8,
                (px[2] * 255.0).round() as u8,
            ]),
        );
    }
    Ok(img)
}
