//! B-spline grid interpolation kernels.
//!
//! Weights are tensor products of one-dimensional B-splines evaluated on the
//! node lattice. Cubic (4-node support per axis) is the default; quadratic
//! (3-node support) is available as a config option. Per-axis weights sum to
//! one and per-axis weight gradients sum to zero.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KernelDegree {
    Quadratic,
    #[default]
    Cubic,
}

impl KernelDegree {
    pub fn support(self) -> usize {
        match self {
            KernelDegree::Quadratic => 3,
            KernelDegree::Cubic => 4,
        }
    }

    /// Inverse inertia constant of the kernel's second moment, used to scale
    /// the affine velocity matrix: 4/h^2 for quadratic, 3/h^2 for cubic.
    pub fn d_inv(self, h: f64) -> f64 {
        match self {
            KernelDegree::Quadratic => 4.0 / (h * h),
            KernelDegree::Cubic => 3.0 / (h * h),
        }
    }
}

/// Per-particle interpolation stencil: base node index plus per-axis weights
/// and weight gradients over the support window.
#[derive(Debug, Clone)]
pub struct KernelWeights {
    pub base: [i64; 3],
    pub w: [[f64; 4]; 3],
    pub dw: [[f64; 4]; 3],
    pub support: usize,
}

fn cubic_1d(d: f64) -> (f64, f64) {
    let a = d.abs();
    let sign = if d < 0.0 { -1.0 } else { 1.0 };
    if a < 1.0 {
        (0.5 * a * a * a - a * a + 2.0 / 3.0, sign * (1.5 * a * a - 2.0 * a))
    } else if a < 2.0 {
        let t = 2.0 - a;
        (t * t * t / 6.0, sign * (-0.5 * t * t))
    } else {
        (0.0, 0.0)
    }
}

fn quadratic_1d(d: f64) -> (f64, f64) {
    let a = d.abs();
    let sign = if d < 0.0 { -1.0 } else { 1.0 };
    if a < 0.5 {
        (0.75 - a * a, -2.0 * d)
    } else if a < 1.5 {
        let t = 1.5 - a;
        (0.5 * t * t, sign * -t)
    } else {
        (0.0, 0.0)
    }
}

/// Evaluate the stencil for a particle at `xp` on a lattice with node spacing
/// `h` anchored at `origin`. Gradients are with respect to `xp` (units 1/h).
pub fn kernel_weights(
    xp: &Vector3<f64>,
    origin: &Vector3<f64>,
    h: f64,
    degree: KernelDegree,
) -> KernelWeights {
    let xg = (xp - origin) / h;
    let mut base = [0i64; 3];
    let mut w = [[0.0; 4]; 3];
    let mut dw = [[0.0; 4]; 3];
    let support = degree.support();
    for axis in 0..3 {
        let b = match degree {
            KernelDegree::Quadratic => (xg[axis] - 0.5).floor(),
            KernelDegree::Cubic => xg[axis].floor() - 1.0,
        };
        base[axis] = b as i64;
        let f = xg[axis] - b;
        for o in 0..support {
            let d = f - o as f64;
            let (wv, dv) = match degree {
                KernelDegree::Quadratic => quadratic_1d(d),
                KernelDegree::Cubic => cubic_1d(d),
            };
            w[axis][o] = wv;
            dw[axis][o] = dv / h;
        }
    }
    KernelWeights {
        base,
        w,
        dw,
        support,
    }
}

impl KernelWeights {
    /// Combined weight for the node at offset `(i, j, k)` from the base.
    pub fn weight(&self, i: usize, j: usize, k: usize) -> f64 {
        self.w[0][i] * self.w[1][j] * self.w[2][k]
    }

    /// Gradient of the combined weight with respect to the particle position.
    pub fn grad(&self, i: usize, j: usize, k: usize) -> Vector3<f64> {
        Vector3::new(
            self.dw[0][i] * self.w[1][j] * self.w[2][k],
            self.w[0][i] * self.dw[1][j] * self.w[2][k],
            self.w[0][i] * self.w[1][j] * self.dw[2][k],
        )
    }
}
