//! Flat-Gaussian and triangle-soup domain types plus the forward/inverse
//! parametrization between them.
//!
//! A flat Gaussian pins its smallest scale to a constant `eps`, which makes the
//! component an elliptical disc. Such a disc is equivalent to a triangle
//! `[v1, v2, v3]` with `v1` at the mean and `v2`, `v3` displaced along the two
//! in-plane principal axes. Both directions of the mapping are implemented
//! here; everything is a pure function over immutable inputs.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Default flatness constant for the pinned scale slot, in world units.
pub const DEFAULT_EPS: f64 = 1e-6;

/// A general 3D Gaussian as found in standard splatting checkpoints: three
/// free scales, not yet flattened.
#[derive(Debug, Clone)]
pub struct Gaussian {
    pub mean: Vector3<f64>,
    /// Orthonormal, columns are the principal axes.
    pub rotation: Matrix3<f64>,
    pub scales: [f64; 3],
    pub opacity: f64,
    pub normal: [f32; 3],
    pub sh_dc: [f32; 3],
    /// Higher-order SH coefficients, raw on-disk order, passed through untouched.
    pub sh_rest: Vec<f32>,
}

/// A Gaussian whose first scale slot is pinned to the flatness constant.
#[derive(Debug, Clone)]
pub struct FlatGaussian {
    pub mean: Vector3<f64>,
    /// Orthonormal with determinant +1; column 1 is the flattened axis.
    pub rotation: Matrix3<f64>,
    /// `scales[0]` equals the configured eps; `scales[1]`, `scales[2]` > 0.
    pub scales: [f64; 3],
    pub opacity: f64,
    pub normal: [f32; 3],
    pub sh_dc: [f32; 3],
    pub sh_rest: Vec<f32>,
}

/// One triangle of the soup: ordered vertex triple plus the rest-state edge
/// lengths recorded at binding time.
#[derive(Debug, Clone)]
pub struct SoupTriangle {
    pub v1: Vector3<f64>,
    pub v2: Vector3<f64>,
    pub v3: Vector3<f64>,
    pub rest_len2: f64,
    pub rest_len3: f64,
    pub source_index: usize,
    pub opacity: f64,
    pub normal: [f32; 3],
    pub sh_dc: [f32; 3],
    pub sh_rest: Vec<f32>,
}

#[derive(Debug, Clone, Default)]
pub struct SceneMeta {
    pub source: Option<std::path::PathBuf>,
    pub eps: f64,
    pub sh_degree: u8,
}

/// An ordered collection of flat Gaussians. List order is stable and serves as
/// the identity mapping to `SoupTriangle::source_index`.
#[derive(Debug, Clone, Default)]
pub struct GaussianScene {
    pub gaussians: Vec<FlatGaussian>,
    pub meta: SceneMeta,
}

impl FlatGaussian {
    /// Covariance `R * diag(s^2) * R^T`. Symmetric PSD by construction.
    pub fn covariance(&self) -> Matrix3<f64> {
        let s2 = Matrix3::from_diagonal(&Vector3::new(
            self.scales[0] * self.scales[0],
            self.scales[1] * self.scales[1],
            self.scales[2] * self.scales[2],
        ));
        self.rotation * s2 * self.rotation.transpose()
    }

    pub fn is_valid(&self, eps: f64) -> bool {
        let r = &self.rotation;
        let ortho = (r.transpose() * r - Matrix3::identity()).norm() < 1e-6;
        ortho
            && (self.scales[0] - eps).abs() < 1e-12
            && self.scales[1] > 0.0
            && self.scales[2] > 0.0
            && (0.0..=1.0).contains(&self.opacity)
    }
}

/// Covariance of a flat Gaussian (free-function form of [`FlatGaussian::covariance`]).
pub fn covariance_of(g: &FlatGaussian) -> Matrix3<f64> {
    g.covariance()
}

/// Pin the smallest scale axis of a general Gaussian to `eps`, permuting it
/// into slot 1. Ties break toward the lowest axis index; if the permutation is
/// odd, column 1 is negated to keep the determinant at +1 (covariance is
/// unaffected by a column sign).
///
/// `index` is only used for diagnostics.
pub fn flatten(g: &Gaussian, eps: f64, index: usize) -> Result<FlatGaussian> {
    let below = g.scales.iter().filter(|&&s| s <= f64::EPSILON).count();
    if below >= 2 {
        return Err(Error::DegenerateGaussian {
            index,
            scales: g.scales,
        });
    }
    let mut min_axis = 0usize;
    for a in 1..3 {
        if g.scales[a] < g.scales[min_axis] {
            min_axis = a;
        }
    }
    let rest: Vec<usize> = (0..3).filter(|&a| a != min_axis).collect();
    let order = [min_axis, rest[0], rest[1]];

    let mut rotation = Matrix3::zeros();
    for (slot, &axis) in order.iter().enumerate() {
        rotation.set_column(slot, &g.rotation.column(axis).into_owned());
    }
    // Moving axis 1 to the front is the only odd permutation of this form.
    if min_axis == 1 {
        let c = -rotation.column(0);
        rotation.set_column(0, &c);
    }

    Ok(FlatGaussian {
        mean: g.mean,
        rotation,
        scales: [eps, g.scales[order[1]], g.scales[order[2]]],
        opacity: g.opacity,
        normal: g.normal,
        sh_dc: g.sh_dc,
        sh_rest: g.sh_rest.clone(),
    })
}

/// Forward parametrization: `v1 = m`, `v2 = m + s2*r2`, `v3 = m + s3*r3`.
pub fn gauss_to_triangle(g: &FlatGaussian, source_index: usize) -> SoupTriangle {
    let r2 = g.rotation.column(1).into_owned();
    let r3 = g.rotation.column(2).into_owned();
    let v1 = g.mean;
    let v2 = g.mean + g.scales[1] * r2;
    let v3 = g.mean + g.scales[2] * r3;
    SoupTriangle {
        v1,
        v2,
        v3,
        rest_len2: (v2 - v1).norm(),
        rest_len3: (v3 - v1).norm(),
        source_index,
        opacity: g.opacity,
        normal: g.normal,
        sh_dc: g.sh_dc,
        sh_rest: g.sh_rest.clone(),
    }
}

/// Single Gram-Schmidt step: remove the `r1` and `r2` components of `w` and
/// normalize the residual. Errors when `w` lies (numerically) in span{r1, r2}.
pub fn orth_step(
    w: &Vector3<f64>,
    r1: &Vector3<f64>,
    r2: &Vector3<f64>,
    index: usize,
) -> Result<Vector3<f64>> {
    let resid = w - w.dot(r1) * r1 - w.dot(r2) * r2;
    let n = resid.norm();
    if n <= 1e-9 * w.norm().max(1e-300) {
        return Err(Error::DegenerateFace { index });
    }
    Ok(resid / n)
}

/// Inverse parametrization: recover the flat Gaussian from a triangle.
///
/// `r1` is the unit face normal (right-handed cross product), `r2` the unit
/// first edge, `r3` the Gram-Schmidt residual of the second edge. `s3` is the
/// inner product of the second edge with `r3`, which is non-negative by
/// construction.
pub fn triangle_to_gauss(t: &SoupTriangle, eps: f64) -> Result<FlatGaussian> {
    let d2 = t.v2 - t.v1;
    let d3 = t.v3 - t.v1;
    let cross = d2.cross(&d3);
    let cn = cross.norm();
    if cn <= 1e-12 * (d2.norm() * d3.norm()).max(1e-300) || d2.norm() == 0.0 {
        return Err(Error::DegenerateFace {
            index: t.source_index,
        });
    }
    let r1 = cross / cn;
    let s2 = d2.norm();
    let r2 = d2 / s2;
    let r3 = orth_step(&d3, &r1, &r2, t.source_index)?;
    let s3 = d3.dot(&r3);
    let rotation = Matrix3::from_columns(&[r1, r2, r3]);
    Ok(FlatGaussian {
        mean: t.v1,
        rotation,
        scales: [eps, s2, s3],
        opacity: t.opacity,
        normal: t.normal,
        sh_dc: t.sh_dc,
        sh_rest: t.sh_rest.clone(),
    })
}
