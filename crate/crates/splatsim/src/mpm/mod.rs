//! Multi-material material point method: the embedded deformation engine.

pub mod grid;
pub mod kernel;
pub mod materials;
pub mod solver;

pub use grid::{BoundaryBehavior, BoundaryFaces, Collider, ColliderShape, SimGrid};
pub use kernel::{kernel_weights, KernelDegree, KernelWeights};
pub use materials::{
    energy_density, first_piola, kirchhoff_stress, plastic_project, stress, MaterialKind,
    MaterialParams,
};
pub use solver::{MpmState, Particle, StepDiag};
