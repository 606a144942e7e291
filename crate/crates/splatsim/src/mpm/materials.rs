//! Constitutive models and plastic return mappings.
//!
//! Elastic and snow use the fixed-corotated energy, snow with exponential
//! hardening on the plastic volume ratio. Sand uses StVK on the logarithmic
//! (Hencky) strain with a Drucker-Prager cone projection. Fluid is a weakly
//! compressible equation of state tracking volume only.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaterialKind {
    Elastic,
    Snow,
    Sand,
    Fluid,
}

#[derive(Debug, Clone)]
pub struct MaterialParams {
    pub kind: MaterialKind,
    /// Rest density, kg per cubic world unit.
    pub density: f64,
    pub youngs: f64,
    pub poisson: f64,
    /// Snow: critical compression.
    pub theta_c: f64,
    /// Snow: critical stretch.
    pub theta_s: f64,
    /// Snow: hardening coefficient.
    pub hardening: f64,
    /// Sand: friction angle, degrees.
    pub friction_angle: f64,
    /// Fluid: bulk modulus.
    pub bulk_modulus: f64,
    /// Fluid: equation-of-state exponent.
    pub gamma: f64,
}

impl MaterialParams {
    pub fn elastic(density: f64, youngs: f64, poisson: f64) -> Self {
        Self {
            kind: MaterialKind::Elastic,
            density,
            youngs,
            poisson,
            theta_c: 2.5e-2,
            theta_s: 7.5e-3,
            hardening: 10.0,
            friction_angle: 30.0,
            bulk_modulus: 0.0,
            gamma: 7.0,
        }
    }

    pub fn snow(density: f64, youngs: f64, poisson: f64) -> Self {
        Self {
            kind: MaterialKind::Snow,
            ..Self::elastic(density, youngs, poisson)
        }
    }

    pub fn sand(density: f64, youngs: f64, poisson: f64, friction_angle: f64) -> Self {
        Self {
            kind: MaterialKind::Sand,
            friction_angle,
            ..Self::elastic(density, youngs, poisson)
        }
    }

    pub fn fluid(density: f64, bulk_modulus: f64, gamma: f64) -> Self {
        Self {
            kind: MaterialKind::Fluid,
            bulk_modulus,
            gamma,
            ..Self::elastic(density, 0.0, 0.3)
        }
    }

    pub fn mu(&self) -> f64 {
        self.youngs / (2.0 * (1.0 + self.poisson))
    }

    pub fn lambda(&self) -> f64 {
        self.youngs * self.poisson / ((1.0 + self.poisson) * (1.0 - 2.0 * self.poisson))
    }

    fn hardened(&self, jp: f64) -> (f64, f64) {
        let factor = match self.kind {
            MaterialKind::Snow => (self.hardening * (1.0 - jp)).exp(),
            _ => 1.0,
        };
        (self.mu() * factor, self.lambda() * factor)
    }

    /// Speed-of-sound estimate for the CFL bound.
    pub fn sound_speed(&self) -> f64 {
        match self.kind {
            MaterialKind::Fluid => (self.bulk_modulus * self.gamma / self.density).sqrt(),
            _ => (self.youngs / self.density).sqrt(),
        }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.density <= 0.0 {
            return bad(format!("material '{name}': density must be positive"));
        }
        match self.kind {
            MaterialKind::Fluid => {
                if self.bulk_modulus <= 0.0 {
                    return bad(format!("material '{name}': bulk_modulus must be positive"));
                }
            }
            _ => {
                if self.youngs <= 0.0 {
                    return bad(format!("material '{name}': youngs must be positive"));
                }
                if !(0.0..0.5).contains(&self.poisson) {
                    return bad(format!("material '{name}': poisson must be in [0, 0.5)"));
                }
            }
        }
        Ok(())
    }
}

/// SVD with both factors forced to proper rotations (det = +1). Requires
/// det(f) > 0, in which case all returned singular values stay positive.
pub fn proper_svd(f: &Matrix3<f64>) -> (Matrix3<f64>, Vector3<f64>, Matrix3<f64>) {
    let svd = f.svd(true, true);
    let mut u = svd.u.expect("svd u");
    let mut vt = svd.v_t.expect("svd v_t");
    let mut s = svd.singular_values;
    if u.determinant() < 0.0 {
        let c = -u.column(2);
        u.set_column(2, &c);
        s[2] = -s[2];
    }
    if vt.determinant() < 0.0 {
        let r = -vt.row(2);
        vt.set_row(2, &r);
        s[2] = -s[2];
    }
    (u, s, vt.transpose())
}

fn check_finite(f: &Matrix3<f64>, step: u64, particle: usize) -> Result<()> {
    if f.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericalBlowup { step, particle })
    }
}

/// Strain energy density at `f_elastic`. The finite-difference dual of
/// [`first_piola`]; kept analytic so the two routes stay independent.
pub fn energy_density(f_elastic: &Matrix3<f64>, plastic_state: f64, mat: &MaterialParams) -> f64 {
    match mat.kind {
        MaterialKind::Elastic | MaterialKind::Snow => {
            let (mu, lambda) = mat.hardened(plastic_state);
            let (_, s, _) = proper_svd(f_elastic);
            let j = f_elastic.determinant();
            let dev: f64 = s.iter().map(|si| (si - 1.0) * (si - 1.0)).sum();
            mu * dev + 0.5 * lambda * (j - 1.0) * (j - 1.0)
        }
        MaterialKind::Sand => {
            let (mu, lambda) = (mat.mu(), mat.lambda());
            let (_, s, _) = proper_svd(f_elastic);
            let eps = s.map(|si| si.ln());
            let tr = eps.sum();
            mu * eps.iter().map(|e| e * e).sum::<f64>() + 0.5 * lambda * tr * tr
        }
        MaterialKind::Fluid => {
            let kappa = mat.bulk_modulus;
            let gamma = mat.gamma;
            let j = f_elastic.determinant();
            kappa * (j.powf(1.0 - gamma) / (gamma - 1.0) + j)
        }
    }
}

/// Fixed-corotated first Piola stress with explicit Lame parameters.
pub fn corotated_piola(f: &Matrix3<f64>, mu: f64, lambda: f64) -> Matrix3<f64> {
    let j = f.determinant();
    let (u, _, v) = proper_svd(f);
    let r = u * v.transpose();
    let f_inv_t = f.try_inverse().unwrap_or_else(Matrix3::zeros).transpose();
    2.0 * mu * (f - r) + lambda * (j - 1.0) * j * f_inv_t
}

/// First Piola-Kirchhoff stress dPsi/dF at `f_elastic`.
pub fn first_piola(f_elastic: &Matrix3<f64>, plastic_state: f64, mat: &MaterialParams) -> Matrix3<f64> {
    let j = f_elastic.determinant();
    match mat.kind {
        MaterialKind::Elastic | MaterialKind::Snow => {
            let (mu, lambda) = mat.hardened(plastic_state);
            corotated_piola(f_elastic, mu, lambda)
        }
        MaterialKind::Sand => {
            let (mu, lambda) = (mat.mu(), mat.lambda());
            let (u, s, v) = proper_svd(f_elastic);
            let eps = s.map(|si| si.ln());
            let tr = eps.sum();
            let diag = Vector3::new(
                (2.0 * mu * eps[0] + lambda * tr) / s[0],
                (2.0 * mu * eps[1] + lambda * tr) / s[1],
                (2.0 * mu * eps[2] + lambda * tr) / s[2],
            );
            u * Matrix3::from_diagonal(&diag) * v.transpose()
        }
        MaterialKind::Fluid => {
            let kappa = mat.bulk_modulus;
            let gamma = mat.gamma;
            let f_inv_t = f_elastic.try_inverse().unwrap_or_else(Matrix3::zeros).transpose();
            -kappa * (j.powf(-gamma) - 1.0) * j * f_inv_t
        }
    }
}

/// Cauchy stress sigma = (1/J) * P * F^T.
pub fn stress(
    f_elastic: &Matrix3<f64>,
    plastic_state: f64,
    mat: &MaterialParams,
    step: u64,
    particle: usize,
) -> Result<Matrix3<f64>> {
    check_finite(f_elastic, step, particle)?;
    let j = f_elastic.determinant();
    let p = first_piola(f_elastic, plastic_state, mat);
    Ok(p * f_elastic.transpose() / j)
}

/// Kirchhoff stress tau = P * F^T = J * sigma; the form the fused grid
/// transfer consumes.
pub fn kirchhoff_stress(
    f_elastic: &Matrix3<f64>,
    plastic_state: f64,
    mat: &MaterialParams,
    step: u64,
    particle: usize,
) -> Result<Matrix3<f64>> {
    check_finite(f_elastic, step, particle)?;
    let p = first_piola(f_elastic, plastic_state, mat);
    Ok(p * f_elastic.transpose())
}

/// Drucker-Prager friction coefficient from the friction angle.
fn dp_alpha(friction_angle_deg: f64) -> f64 {
    let phi = friction_angle_deg.to_radians();
    let s = phi.sin();
    (2.0 / 3.0f64).sqrt() * 2.0 * s / (3.0 - s)
}

/// Project a trial elastic deformation gradient back onto the material's
/// yield surface. Returns the admissible gradient and the updated plastic
/// state (J_p for snow; unchanged otherwise).
pub fn plastic_project(
    f_trial: &Matrix3<f64>,
    plastic_state: f64,
    mat: &MaterialParams,
) -> (Matrix3<f64>, f64) {
    match mat.kind {
        MaterialKind::Elastic => (*f_trial, plastic_state),
        MaterialKind::Snow => {
            let (u, s, v) = proper_svd(f_trial);
            let clamped = s.map(|si| si.clamp(1.0 - mat.theta_c, 1.0 + mat.theta_s));
            let j_trial = s[0] * s[1] * s[2];
            let j_new = clamped[0] * clamped[1] * clamped[2];
            let f_new = u * Matrix3::from_diagonal(&clamped) * v.transpose();
            // det(F^E F^P) is conserved: the volume squeezed out of F^E moves
            // into the tracked plastic ratio.
            let jp = (plastic_state * j_trial / j_new).max(1e-6);
            (f_new, jp)
        }
        MaterialKind::Sand => {
            let (u, s, v) = proper_svd(f_trial);
            let eps = s.map(|si| si.ln());
            let tr = eps.sum();
            let dev = eps - Vector3::repeat(tr / 3.0);
            let dev_norm = dev.norm();
            let (mu, lambda) = (mat.mu(), mat.lambda());
            let alpha = dp_alpha(mat.friction_angle);
            let eps_new = if tr > 0.0 {
                // net expansion: project to the cone tip
                Vector3::zeros()
            } else if dev_norm < 1e-14 {
                eps
            } else {
                let dg = dev_norm + (3.0 * lambda + 2.0 * mu) / (2.0 * mu) * tr * alpha;
                if dg <= 0.0 {
                    eps
                } else {
                    eps - dg * dev / dev_norm
                }
            };
            let s_new = eps_new.map(f64::exp);
            (u * Matrix3::from_diagonal(&s_new) * v.transpose(), plastic_state)
        }
        MaterialKind::Fluid => {
            let j = f_trial.determinant();
            (Matrix3::from_diagonal_element(j.cbrt()), plastic_state)
        }
    }
}

/// Drucker-Prager yield value on log strains; admissible states satisfy <= 0.
/// Used as the cone-membership oracle in tests.
pub fn dp_yield(eps: &Vector3<f64>, mat: &MaterialParams) -> f64 {
    let tr = eps.sum();
    let dev = eps - Vector3::repeat(tr / 3.0);
    let (mu, lambda) = (mat.mu(), mat.lambda());
    dev.norm() + (3.0 * lambda + 2.0 * mu) / (2.0 * mu) * tr * dp_alpha(mat.friction_angle)
}
