//! Declarative scene description: objects, materials, grid, forces, colliders,
//! and the output schedule. Parsed from TOML; unknown keys are rejected and
//! every document either yields a valid config or a located error.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::mpm::{BoundaryBehavior, KernelDegree, MaterialKind, MaterialParams};
use crate::splat::DEFAULT_EPS;

fn default_gravity() -> [f64; 3] {
    [0.0, 0.0, -9.8]
}
fn default_frame_rate() -> f64 {
    60.0
}
fn default_alpha() -> f64 {
    2.0
}
fn default_true() -> bool {
    true
}
fn default_eps() -> f64 {
    DEFAULT_EPS
}
fn default_fill() -> f64 {
    0.4
}
fn default_scale() -> f64 {
    1.0
}
fn default_density() -> f64 {
    1000.0
}
fn default_youngs() -> f64 {
    1e4
}
fn default_poisson() -> f64 {
    0.3
}
fn default_theta_c() -> f64 {
    2.5e-2
}
fn default_theta_s() -> f64 {
    7.5e-3
}
fn default_hardening() -> f64 {
    10.0
}
fn default_friction() -> f64 {
    30.0
}
fn default_bulk() -> f64 {
    5e4
}
fn default_gamma() -> f64 {
    7.0
}
fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Ply]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub objects: Vec<ObjectConfig>,
    pub materials: Vec<MaterialConfig>,
    #[serde(default = "default_gravity")]
    pub gravity: [f64; 3],
    #[serde(default)]
    pub wind: Option<WindConfig>,
    #[serde(default)]
    pub colliders: Vec<ColliderConfig>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    /// Frame-level timestep override; the solver still substeps to its CFL
    /// bound internally.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_frame_rate")]
    pub frame_rate: f64,
    pub duration: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_true")]
    pub correction: bool,
    #[serde(default)]
    pub deterministic: bool,
    #[serde(default)]
    pub kernel: KernelDegree,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Bounding-box fill fraction used for per-object volume estimation.
    #[serde(default = "default_fill")]
    pub fill_fraction: f64,
    #[serde(default)]
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectConfig {
    /// Path to the Gaussian PLY asset, relative to the config file.
    pub asset: String,
    /// Name of an entry in `materials`.
    pub material: String,
    #[serde(default)]
    pub translation: [f64; 3],
    /// Euler XYZ rotation, degrees.
    #[serde(default)]
    pub rotation: [f64; 3],
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default)]
    pub velocity: [f64; 3],
    /// Static collider-only object: rendered unchanged, collided against an
    /// analytic bounding proxy, never simulated.
    #[serde(default)]
    pub pinned: bool,
    /// Optional simulated region; Gaussians outside it stay static.
    #[serde(default)]
    pub region: Option<RegionConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub name: String,
    pub kind: MaterialKind,
    #[serde(default = "default_density")]
    pub density: f64,
    #[serde(default = "default_youngs")]
    pub youngs: f64,
    #[serde(default = "default_poisson")]
    pub poisson: f64,
    #[serde(default = "default_theta_c")]
    pub theta_c: f64,
    #[serde(default = "default_theta_s")]
    pub theta_s: f64,
    #[serde(default = "default_hardening")]
    pub hardening: f64,
    #[serde(default = "default_friction")]
    pub friction_angle: f64,
    #[serde(default = "default_bulk")]
    pub bulk_modulus: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

impl MaterialConfig {
    pub fn to_params(&self) -> Result<MaterialParams> {
        let params = MaterialParams {
            kind: self.kind,
            density: self.density,
            youngs: self.youngs,
            poisson: self.poisson,
            theta_c: self.theta_c,
            theta_s: self.theta_s,
            hardening: self.hardening,
            friction_angle: self.friction_angle,
            bulk_modulus: self.bulk_modulus,
            gamma: self.gamma,
        };
        params.validate(&self.name)?;
        Ok(params)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RegionConfig {
    Box { min: [f64; 3], max: [f64; 3] },
    Sphere { center: [f64; 3], radius: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ColliderConfig {
    HalfSpace {
        point: [f64; 3],
        normal: [f64; 3],
        #[serde(default)]
        behavior: BoundaryBehavior,
    },
    Sphere {
        center: [f64; 3],
        radius: f64,
        #[serde(default)]
        behavior: BoundaryBehavior,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum WindConfig {
    /// Constant acceleration added to gravity.
    Constant { accel: [f64; 3] },
    /// `amplitude * sin(frequency * t)`, frequency in rad/s.
    Sinusoid { amplitude: [f64; 3], frequency: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub origin: Option<[f64; 3]>,
    #[serde(default)]
    pub h: Option<f64>,
    /// Node counts; also used as the auto-fit target when origin/h are absent.
    #[serde(default)]
    pub resolution: Option<[usize; 3]>,
    /// Uniform behavior for all six domain faces.
    #[serde(default)]
    pub boundary: Option<BoundaryBehavior>,
    /// Per-face override, ordered [-x, +x, -y, +y, -z, +z].
    #[serde(default)]
    pub boundary_faces: Option<[BoundaryBehavior; 6]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Ply,
    Obj,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<std::path::PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.objects.is_empty() {
            return err("at least one object is required".into());
        }
        if self.duration <= 0.0 {
            return err("duration must be positive".into());
        }
        if self.frame_rate <= 0.0 {
            return err("frame_rate must be positive".into());
        }
        if self.alpha <= 1.0 {
            return err("alpha must exceed 1".into());
        }
        if self.eps <= 0.0 {
            return err("eps must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.fill_fraction) || self.fill_fraction == 0.0 {
            return err("fill_fraction must be in (0, 1]".into());
        }
        if let Some(dt) = self.dt {
            if dt <= 0.0 {
                return err("dt must be positive".into());
            }
        }
        for m in &self.materials {
            m.to_params()?;
        }
        for o in &self.objects {
            if !self.materials.iter().any(|m| m.name == o.material) {
                return err(format!(
                    "object '{}' references unknown material '{}'",
                    o.asset, o.material
                ));
            }
            if o.scale <= 0.0 {
                return err(format!("object '{}': scale must be positive", o.asset));
            }
        }
        Ok(())
    }

    pub fn material_index(&self, name: &str) -> Option<usize> {
        self.materials.iter().position(|m| m.name == name)
    }
}

/// Parse and validate a scene config document.
pub fn read_scene_config(path: &std::path::Path) -> Result<SceneConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_scene_config(&text)
}

pub fn parse_scene_config(text: &str) -> Result<SceneConfig> {
    let cfg: SceneConfig =
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}
