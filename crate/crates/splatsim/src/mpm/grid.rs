//! Background Eulerian grid and collision geometry.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryBehavior {
    Sticky,
    #[default]
    Slip,
    Separate,
}

impl BoundaryBehavior {
    /// Project a velocity against a surface with outward normal `n`.
    pub fn project(self, v: &Vector3<f64>, n: &Vector3<f64>) -> Vector3<f64> {
        match self {
            BoundaryBehavior::Sticky => Vector3::zeros(),
            BoundaryBehavior::Slip => v - n * v.dot(n),
            BoundaryBehavior::Separate => {
                let vn = v.dot(n);
                if vn < 0.0 {
                    v - n * vn
                } else {
                    *v
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum ColliderShape {
    HalfSpace {
        point: Vector3<f64>,
        /// Unit normal pointing out of the solid region.
        normal: Vector3<f64>,
    },
    Sphere {
        center: Vector3<f64>,
        radius: f64,
    },
}

#[derive(Debug, Clone)]
pub struct Collider {
    pub shape: ColliderShape,
    pub behavior: BoundaryBehavior,
}

impl Collider {
    /// Outward normal if `x` is inside the solid region.
    pub fn penetration_normal(&self, x: &Vector3<f64>) -> Option<Vector3<f64>> {
        match &self.shape {
            ColliderShape::HalfSpace { point, normal } => {
                if (x - point).dot(normal) <= 0.0 {
                    Some(*normal)
                } else {
                    None
                }
            }
            ColliderShape::Sphere { center, radius } => {
                let d = x - center;
                let n = d.norm();
                if n <= *radius {
                    if n > 1e-12 {
                        Some(d / n)
                    } else {
                        Some(Vector3::z())
                    }
                } else {
                    None
                }
            }
        }
    }

    pub fn apply(&self, x: &Vector3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
        match self.penetration_normal(x) {
            Some(n) => self.behavior.project(v, &n),
            None => *v,
        }
    }
}

/// Domain-boundary behavior for the six grid faces, ordered
/// `[-x, +x, -y, +y, -z, +z]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct BoundaryFaces(pub [BoundaryBehavior; 6]);

/// Uniform background grid. After `p2g` the vector field holds momentum;
/// `grid_update` normalizes it to velocity in place.
#[derive(Debug, Clone)]
pub struct SimGrid {
    pub origin: Vector3<f64>,
    pub h: f64,
    pub res: [usize; 3],
    pub mass: Vec<f64>,
    pub vel: Vec<Vector3<f64>>,
    pub faces: BoundaryFaces,
}

impl SimGrid {
    pub fn new(origin: Vector3<f64>, h: f64, res: [usize; 3]) -> Self {
        assert!(h > 0.0, "cell size must be positive");
        assert!(
            res.iter().all(|&r| r >= 4),
            "resolution must be >= 4 per axis for kernel support"
        );
        let n = res[0] * res[1] * res[2];
        Self {
            origin,
            h,
            res,
            mass: vec![0.0; n],
            vel: vec![Vector3::zeros(); n],
            faces: BoundaryFaces::default(),
        }
    }

    /// Fit a grid to a point set: pad the bounding box by `pad_cells` cells on
    /// every side and by a motion margin proportional to the extent, with
    /// `res` nodes along the longest axis.
    pub fn fit(points: impl Iterator<Item = Vector3<f64>>, res: usize, pad_cells: usize) -> Self {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for p in points {
            lo = lo.inf(&p);
            hi = hi.sup(&p);
        }
        assert!(lo.x.is_finite(), "cannot fit a grid to an empty point set");
        let extent = (hi - lo).max().max(1e-3);
        let margin = 0.5 * extent;
        let lo = lo - Vector3::repeat(margin);
        let hi = hi + Vector3::repeat(margin);
        let h = (hi - lo).max() / (res.saturating_sub(2 * pad_cells).max(4)) as f64;
        let origin = lo - Vector3::repeat(pad_cells as f64 * h);
        let mut dims = [0usize; 3];
        for a in 0..3 {
            dims[a] = (((hi[a] - lo[a]) / h).ceil() as usize + 2 * pad_cells + 1).max(4);
        }
        Self::new(origin, h, dims)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.res[1] + j) * self.res[2] + k
    }

    pub fn node_pos(&self, i: usize, j: usize, k: usize) -> Vector3<f64> {
        self.origin + self.h * Vector3::new(i as f64, j as f64, k as f64)
    }

    pub fn clear(&mut self) {
        self.mass.fill(0.0);
        self.vel.fill(Vector3::zeros());
    }

    /// Particles must stay at least 2h inside the node lattice for the
    /// interpolation stencil to be fully contained.
    pub fn in_safe_domain(&self, x: &Vector3<f64>) -> bool {
        for a in 0..3 {
            let lo = self.origin[a] + 2.0 * self.h;
            let hi = self.origin[a] + (self.res[a] as f64 - 1.0) * self.h - 2.0 * self.h;
            if x[a] < lo || x[a] > hi {
                return false;
            }
        }
        true
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn total_momentum(&self) -> Vector3<f64> {
        self.mass
            .iter()
            .zip(&self.vel)
            .map(|(m, v)| *m * v)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_projection_modes() {
        let n = Vector3::z();
        let v = Vector3::new(1.0, 2.0, -3.0);
        assert_eq!(BoundaryBehavior::Sticky.project(&v, &n), Vector3::zeros());
        assert_eq!(
            BoundaryBehavior::Slip.project(&v, &n),
            Vector3::new(1.0, 2.0, 0.0)
        );
        assert_eq!(
            BoundaryBehavior::Separate.project(&v, &n),
            Vector3::new(1.0, 2.0, 0.0)
        );
        let outward = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(BoundaryBehavior::Separate.project(&outward, &n), outward);
    }

    #[test]
    fn half_space_collider() {
        let c = Collider {
            shape: ColliderShape::HalfSpace {
                point: Vector3::new(0.0, 0.0, 0.1),
                normal: Vector3::z(),
            },
            behavior: BoundaryBehavior::Sticky,
        };
        let below = Vector3::new(0.5, 0.5, 0.05);
        let above = Vector3::new(0.5, 0.5, 0.5);
        let v = Vector3::new(0.0, 0.0, -1.0);
        assert_eq!(c.apply(&below, &v), Vector3::zeros());
        assert_eq!(c.apply(&above, &v), v);
    }

    #[test]
    fn fit_contains_points_with_safe_margin() {
        let pts = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.5, 0.25),
        ];
        let g = SimGrid::fit(pts.iter().cloned(), 64, 4);
        for p in &pts {
            assert!(g.in_safe_domain(p));
        }
    }
}
