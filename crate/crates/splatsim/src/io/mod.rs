//! File formats: Gaussian PLY checkpoints, OBJ soup interchange, and frame
//! sequences with a JSONL manifest.

pub mod frames;
pub mod obj;
pub mod ply;

pub use frames::FrameWriter;
pub use obj::{read_obj, write_obj};
pub use ply::{read_ply, read_ply_with_eps, write_ply};
