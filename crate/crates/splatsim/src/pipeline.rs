//! Scene orchestration: bind Gaussians to particles, drive a deformation map
//! over the frame schedule, and reconstruct corrected Gaussian frames.
//!
//! The deformation map is pluggable. The embedded MPM solver implements it,
//! but any engine that can move the soup vertices qualifies; binding,
//! correction, and reconstruction never look inside it.

use nalgebra::{Rotation3, Vector3};

use crate::config::{ColliderConfig, RegionConfig, SceneConfig, WindConfig};
use crate::correction::{apply_scale_clip, CorrectionConfig};
use crate::error::{Error, Result};
use crate::mpm::{
    BoundaryBehavior, Collider, ColliderShape, MpmState, Particle, SimGrid, StepDiag,
};
use crate::splat::{gauss_to_triangle, triangle_to_gauss, FlatGaussian, GaussianScene, SceneMeta, SoupTriangle};

/// Spatial selection predicate for partial simulation.
#[derive(Debug, Clone)]
pub enum Region {
    Box {
        min: Vector3<f64>,
        max: Vector3<f64>,
    },
    Sphere {
        center: Vector3<f64>,
        radius: f64,
    },
}

impl Region {
    pub fn contains(&self, x: &Vector3<f64>) -> bool {
        match self {
            Region::Box { min, max } => (0..3).all(|a| x[a] >= min[a] && x[a] <= max[a]),
            Region::Sphere { center, radius } => (x - center).norm() <= *radius,
        }
    }
}

impl From<&RegionConfig> for Region {
    fn from(r: &RegionConfig) -> Self {
        match r {
            RegionConfig::Box { min, max } => Region::Box {
                min: Vector3::from(*min),
                max: Vector3::from(*max),
            },
            RegionConfig::Sphere { center, radius } => Region::Sphere {
                center: Vector3::from(*center),
                radius: *radius,
            },
        }
    }
}

/// Partition a scene's Gaussian indices into (simulated, static) by testing
/// each mean against the region. An empty selection is a warning, not an
/// error; the run degrades to static playback.
pub fn select_region(scene: &GaussianScene, region: &Region) -> (Vec<usize>, Vec<usize>) {
    let mut simulated = Vec::new();
    let mut fixed = Vec::new();
    for (i, g) in scene.gaussians.iter().enumerate() {
        if region.contains(&g.mean) {
            simulated.push(i);
        } else {
            fixed.push(i);
        }
    }
    if simulated.is_empty() {
        eprintln!("warning: region selects no Gaussians; object plays back statically");
    }
    (simulated, fixed)
}

/// Rest-state binding of a scene: the triangle soup, its particles (three per
/// triangle), and everything that stays static.
#[derive(Debug, Clone)]
pub struct BoundState {
    pub triangles: Vec<SoupTriangle>,
    pub particles: Vec<Particle>,
    /// Triangle index span per simulated object.
    pub object_ranges: Vec<std::ops::Range<usize>>,
    /// Gaussians emitted unchanged in every frame (pinned objects and
    /// out-of-region selections).
    pub static_gaussians: Vec<FlatGaussian>,
    /// Analytic proxies for pinned objects.
    pub pinned_colliders: Vec<Collider>,
}

fn transform_gaussian(
    g: &FlatGaussian,
    translation: &Vector3<f64>,
    rotation: &Rotation3<f64>,
    scale: f64,
    eps: f64,
) -> FlatGaussian {
    let mut out = g.clone();
    out.mean = translation + scale * (rotation * g.mean);
    out.rotation = rotation.matrix() * g.rotation;
    out.scales = [eps, scale * g.scales[1], scale * g.scales[2]];
    out
}

/// Bind config objects to a particle system. Every simulated Gaussian becomes
/// one triangle and three particles; pinned objects become colliders plus
/// static render geometry.
pub fn bind(cfg: &SceneConfig, assets: &[GaussianScene]) -> Result<BoundState> {
    if assets.len() != cfg.objects.len() {
        return Err(Error::Config(format!(
            "expected {} assets, got {}",
            cfg.objects.len(),
            assets.len()
        )));
    }
    let mut triangles = Vec::new();
    let mut particles: Vec<Particle> = Vec::new();
    let mut object_ranges = Vec::new();
    let mut static_gaussians = Vec::new();
    let mut pinned_colliders = Vec::new();

    for (obj, asset) in cfg.objects.iter().zip(assets) {
        let mat_idx = cfg
            .material_index(&obj.material)
            .ok_or_else(|| {
                Error::Config(format!(
                    "object '{}' references unknown material '{}'",
                    obj.asset, obj.material
                ))
            })?;
        let density = cfg.materials[mat_idx].density;
        let rot = Rotation3::from_euler_angles(
            obj.rotation[0].to_radians(),
            obj.rotation[1].to_radians(),
            obj.rotation[2].to_radians(),
        );
        let tr = Vector3::from(obj.translation);
        let transformed: Vec<FlatGaussian> = asset
            .gaussians
            .iter()
            .map(|g| transform_gaussian(g, &tr, &rot, obj.scale, cfg.eps))
            .collect();

        if obj.pinned {
            // static proxy: bounding sphere of the means, padded by the
            // largest in-plane scale
            let n = transformed.len().max(1) as f64;
            let center: Vector3<f64> =
                transformed.iter().map(|g| g.mean).sum::<Vector3<f64>>() / n;
            let radius = transformed
                .iter()
                .map(|g| (g.mean - center).norm() + g.scales[1].max(g.scales[2]))
                .fold(0.0, f64::max);
            pinned_colliders.push(Collider {
                shape: ColliderShape::Sphere { center, radius },
                behavior: BoundaryBehavior::Slip,
            });
            static_gaussians.extend(transformed);
            continue;
        }

        let scene_view = GaussianScene {
            gaussians: transformed,
            meta: asset.meta.clone(),
        };
        let (sim_idx, static_idx) = match &obj.region {
            Some(r) => select_region(&scene_view, &Region::from(r)),
            None => ((0..scene_view.gaussians.len()).collect(), Vec::new()),
        };
        for i in static_idx {
            static_gaussians.push(scene_view.gaussians[i].clone());
        }

        let tri_start = triangles.len();
        let particle_start = particles.len();
        for &i in &sim_idx {
            let tri_index = triangles.len();
            let t = gauss_to_triangle(&scene_view.gaussians[i], tri_index);
            let velocity = Vector3::from(obj.velocity);
            for (slot, v) in [t.v1, t.v2, t.v3].into_iter().enumerate() {
                let mut p = Particle::at_rest(v, 0.0, 0.0, mat_idx);
                p.velocity = velocity;
                p.source = (tri_index, slot as u8);
                particles.push(p);
            }
            triangles.push(t);
        }
        object_ranges.push(tri_start..triangles.len());

        // volume estimate: bounding box x fill fraction, split evenly
        let obj_particles = &mut particles[particle_start..];
        if !obj_particles.is_empty() {
            let mut lo = Vector3::repeat(f64::INFINITY);
            let mut hi = Vector3::repeat(f64::NEG_INFINITY);
            for p in obj_particles.iter() {
                lo = lo.inf(&p.position);
                hi = hi.sup(&p.position);
            }
            let ext = (hi - lo).map(|e| e.max(1e-6));
            let volume = ext.x * ext.y * ext.z * cfg.fill_fraction;
            let per_particle = volume / obj_particles.len() as f64;
            for p in obj_particles.iter_mut() {
                p.volume0 = per_particle;
                p.mass = density * per_particle;
            }
        }
    }

    Ok(BoundState {
        triangles,
        particles,
        object_ranges,
        static_gaussians,
        pinned_colliders,
    })
}

/// Engine-agnostic deformation map over the bound vertex set. Implementations
/// are queried at strictly increasing times and must preserve vertex count.
pub trait DeformationMap {
    /// Vertex positions at simulation time `t`, in binding order
    /// (triangle-major, slots 1..3).
    fn positions_at(&mut self, t: f64) -> Result<Vec<Vector3<f64>>>;

    /// Most recent solver diagnostics, when the map has any.
    fn diagnostics(&self) -> Option<StepDiag> {
        None
    }
}

/// The identity map: vertices never move.
pub struct IdentityMap {
    pub rest: Vec<Vector3<f64>>,
}

impl DeformationMap for IdentityMap {
    fn positions_at(&mut self, _t: f64) -> Result<Vec<Vector3<f64>>> {
        Ok(self.rest.clone())
    }
}

/// Rigid translation at constant velocity: `phi(X, t) = X + t * d`.
pub struct RigidTranslationMap {
    pub rest: Vec<Vector3<f64>>,
    pub velocity: Vector3<f64>,
}

impl DeformationMap for RigidTranslationMap {
    fn positions_at(&mut self, t: f64) -> Result<Vec<Vector3<f64>>> {
        Ok(self.rest.iter().map(|x| x + t * self.velocity).collect())
    }
}

/// The embedded MPM solver behind the deformation-map interface.
pub struct MpmDeformation {
    pub state: MpmState,
    force: Box<dyn Fn(&Vector3<f64>, f64) -> Vector3<f64>>,
    last_diag: Option<StepDiag>,
}

impl MpmDeformation {
    pub fn new(state: MpmState, force: Box<dyn Fn(&Vector3<f64>, f64) -> Vector3<f64>>) -> Self {
        Self {
            state,
            force,
            last_diag: None,
        }
    }
}

impl DeformationMap for MpmDeformation {
    fn positions_at(&mut self, t: f64) -> Result<Vec<Vector3<f64>>> {
        let dt = t - self.state.time;
        if dt > 1e-12 {
            let diag = self.state.step(dt, &*self.force)?;
            self.last_diag = Some(diag);
        } else if self.last_diag.is_none() {
            self.last_diag = Some(self.state.diagnostics());
        }
        Ok(self.state.particles.iter().map(|p| p.position).collect())
    }

    fn diagnostics(&self) -> Option<StepDiag> {
        self.last_diag
    }
}

/// Body-force field: gravity plus the configured wind.
pub fn body_force(
    gravity: [f64; 3],
    wind: Option<WindConfig>,
) -> Box<dyn Fn(&Vector3<f64>, f64) -> Vector3<f64>> {
    let g = Vector3::from(gravity);
    match wind {
        None => Box::new(move |_, _| g),
        Some(WindConfig::Constant { accel }) => {
            let a = Vector3::from(accel);
            Box::new(move |_, _| g + a)
        }
        Some(WindConfig::Sinusoid {
            amplitude,
            frequency,
        }) => {
            let a = Vector3::from(amplitude);
            Box::new(move |_, t| g + a * (frequency * t).sin())
        }
    }
}

/// One reconstructed output frame: every Gaussian of the input scene, in
/// stable order (simulated first, then statics).
#[derive(Debug, Clone)]
pub struct FrameResult {
    pub index: usize,
    pub time: f64,
    pub scene: GaussianScene,
    pub diag: Option<StepDiag>,
}

#[derive(Debug, Clone)]
pub struct RunSettings {
    pub frame_rate: f64,
    pub duration: f64,
    pub correction: CorrectionConfig,
    pub eps: f64,
}

impl RunSettings {
    pub fn frame_count(&self) -> usize {
        ((self.duration * self.frame_rate).round() as usize).max(1)
    }
}

/// Drive the deformation map over the frame schedule, reconstruct each frame
/// through the inverse parametrization plus the scale clip, and hand frames
/// to the sink. On solver failure the frames already emitted stand and the
/// error reports the last good frame index.
pub fn run<F>(
    bound: &BoundState,
    settings: &RunSettings,
    deform: &mut dyn DeformationMap,
    mut sink: F,
) -> Result<()>
where
    F: FnMut(&FrameResult) -> Result<()>,
{
    let n_frames = settings.frame_count();
    // fallback rotations for mid-simulation degenerate triangles
    let mut last_good: Vec<FlatGaussian> = bound
        .triangles
        .iter()
        .map(|t| triangle_to_gauss(t, settings.eps))
        .collect::<Result<_>>()?;

    for k in 0..n_frames {
        let t = k as f64 / settings.frame_rate;
        let positions = match deform.positions_at(t) {
            Ok(p) => p,
            Err(e) => {
                return Err(Error::SolverHalted {
                    last_good_frame: k as i64 - 1,
                    source: Box::new(e),
                })
            }
        };
        if positions.len() != 3 * bound.triangles.len() {
            return Err(Error::Config(format!(
                "deformation map returned {} vertices, expected {}",
                positions.len(),
                3 * bound.triangles.len()
            )));
        }
        let mut gaussians = Vec::with_capacity(bound.triangles.len() + bound.static_gaussians.len());
        for (i, rest) in bound.triangles.iter().enumerate() {
            let mut tri = rest.clone();
            tri.v1 = positions[3 * i];
            tri.v2 = positions[3 * i + 1];
            tri.v3 = positions[3 * i + 2];
            let g = match apply_scale_clip(&tri, &settings.correction, settings.eps) {
                Ok(g) => {
                    last_good[i] = g.clone();
                    g
                }
                Err(Error::DegenerateFace { .. }) => {
                    // collapse: keep the previous frame's orientation with
                    // near-zero in-plane scales
                    let mut g = last_good[i].clone();
                    g.mean = tri.v1;
                    g.scales = [settings.eps, 1e-8, 1e-8];
                    g
                }
                Err(e) => return Err(e),
            };
            gaussians.push(g);
        }
        gaussians.extend(bound.static_gaussians.iter().cloned());
        let frame = FrameResult {
            index: k,
            time: t,
            scene: GaussianScene {
                gaussians,
                meta: SceneMeta {
                    source: None,
                    eps: settings.eps,
                    sh_degree: sh_degree_of(bound),
                },
            },
            diag: deform.diagnostics(),
        };
        sink(&frame)?;
    }
    Ok(())
}

fn sh_degree_of(bound: &BoundState) -> u8 {
    let rest_len = bound
        .triangles
        .first()
        .map(|t| t.sh_rest.len())
        .or_else(|| bound.static_gaussians.first().map(|g| g.sh_rest.len()))
        .unwrap_or(0);
    // (deg+1)^2 coefficients total, 1 of which is the DC term
    match rest_len / 3 {
        0 => 0,
        3 => 1,
        8 => 2,
        _ => 3,
    }
}

/// Build the embedded solver for a bound scene: grid from config or auto-fit,
/// colliders from config plus pinned proxies.
pub fn build_mpm(cfg: &SceneConfig, bound: &BoundState) -> Result<MpmState> {
    let materials = cfg
        .materials
        .iter()
        .map(|m| m.to_params())
        .collect::<Result<Vec<_>>>()?;

    let mut grid = match &cfg.grid {
        Some(gc) => match (gc.origin, gc.h, gc.resolution) {
            (Some(origin), Some(h), Some(res)) => {
                SimGrid::new(Vector3::from(origin), h, res)
            }
            _ => {
                let res = gc.resolution.map(|r| r[0]).unwrap_or(64);
                SimGrid::fit(bound.particles.iter().map(|p| p.position), res, 4)
            }
        },
        None => SimGrid::fit(bound.particles.iter().map(|p| p.position), 64, 4),
    };
    if let Some(gc) = &cfg.grid {
        if let Some(b) = gc.boundary {
            grid.faces.0 = [b; 6];
        }
        if let Some(faces) = gc.boundary_faces {
            grid.faces.0 = faces;
        }
    }

    let mut colliders: Vec<Collider> = cfg
        .colliders
        .iter()
        .map(|c| match c {
            ColliderConfig::HalfSpace {
                point,
                normal,
                behavior,
            } => Collider {
                shape: ColliderShape::HalfSpace {
                    point: Vector3::from(*point),
                    normal: Vector3::from(*normal).normalize(),
                },
                behavior: *behavior,
            },
            ColliderConfig::Sphere {
                center,
                radius,
                behavior,
            } => Collider {
                shape: ColliderShape::Sphere {
                    center: Vector3::from(*center),
                    radius: *radius,
                },
                behavior: *behavior,
            },
        })
        .collect();
    colliders.extend(bound.pinned_colliders.iter().cloned());

    Ok(MpmState::new(
        bound.particles.clone(),
        grid,
        materials,
        colliders,
        cfg.kernel,
    ))
}
