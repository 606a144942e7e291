//! Scale-clipping correction.
//!
//! Independently moving vertices can stretch a triangle far past its rest
//! size, which reconstructs into an oversized Gaussian. Whenever a deformed
//! edge exceeds `alpha` times its rest length, the corresponding scale is
//! clipped to `alpha * rest_len`. The clip is a rendering-side repair: it
//! never feeds back into the particle positions.

use crate::error::Result;
use crate::splat::{triangle_to_gauss, FlatGaussian, SoupTriangle};

#[derive(Debug, Clone, Copy)]
pub struct CorrectionConfig {
    /// Stretch tolerance factor, > 1.
    pub alpha: f64,
    pub enabled: bool,
}

impl Default for CorrectionConfig {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            enabled: true,
        }
    }
}

impl CorrectionConfig {
    pub fn new(alpha: f64, enabled: bool) -> Self {
        assert!(alpha > 1.0, "correction alpha must exceed 1");
        Self { alpha, enabled }
    }
}

/// Reconstruct a Gaussian from a deformed triangle, clipping the in-plane
/// scales to `alpha` times their rest lengths. Mean and rotation come from
/// the plain reconstruction; clipping rescales along the recovered axes
/// about `v1`.
pub fn apply_scale_clip(t: &SoupTriangle, cfg: &CorrectionConfig, eps: f64) -> Result<FlatGaussian> {
    let mut g = triangle_to_gauss(t, eps)?;
    if !cfg.enabled {
        return Ok(g);
    }
    let limits = [cfg.alpha * t.rest_len2, cfg.alpha * t.rest_len3];
    for (slot, limit) in [(1usize, limits[0]), (2usize, limits[1])] {
        if g.scales[slot] > limit {
            g.scales[slot] = limit;
        }
    }
    Ok(g)
}
