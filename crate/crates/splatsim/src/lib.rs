//! Physics-driven animation of Gaussian Splatting scenes.
//!
//! Flat Gaussians are reparametrized as a triangle soup, the soup vertices are
//! advected by a pluggable deformation map (the embedded multi-material MPM
//! solver by default), and each frame is reconstructed back into a renderable
//! Gaussian scene with a stretch-limiting scale clip.

pub mod config;
pub mod correction;
pub mod error;
pub mod io;
pub mod mpm;
pub mod pipeline;
pub mod preview;
pub mod splat;

pub use error::{Error, Result};
