//! Wavefront OBJ interchange for the triangle soup.
//!
//! Each Gaussian maps to one `f` record over three consecutive `v` records in
//! soup order. Coordinates are printed with Rust's shortest round-trip float
//! formatting, so an OBJ round trip reproduces the vertex positions exactly.
//! Appearance attributes (opacity, SH) have no OBJ representation and are
//! reset to defaults on import.

use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::splat::{gauss_to_triangle, GaussianScene, SoupTriangle};

/// Default opacity assigned to triangles imported from OBJ.
pub const OBJ_DEFAULT_OPACITY: f64 = 0.5;

/// Write a scene as an OBJ triangle soup.
pub fn write_obj(scene: &GaussianScene, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    for (i, g) in scene.gaussians.iter().enumerate() {
        let t = gauss_to_triangle(g, i);
        for v in [t.v1, t.v2, t.v3] {
            writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
        }
    }
    for i in 0..scene.gaussians.len() {
        let b = 3 * i + 1;
        writeln!(w, "f {} {} {}", b, b + 1, b + 2)?;
    }
    w.flush()?;
    Ok(())
}

fn obj_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::ObjParse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Strip an OBJ face-index reference down to its vertex index
/// (`7/2/3` -> `7`).
fn face_index(tok: &str) -> Option<usize> {
    tok.split('/').next()?.parse().ok()
}

/// Read an OBJ triangle soup. Rest lengths are taken from the imported
/// geometry itself, i.e. the file is treated as a rest state.
pub fn read_obj(path: &Path) -> Result<Vec<SoupTriangle>> {
    let text = std::fs::read_to_string(path)?;
    let mut vertices: Vec<Vector3<f64>> = Vec::new();
    let mut triangles: Vec<SoupTriangle> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let mut coord = [0.0f64; 3];
                for c in coord.iter_mut() {
                    *c = tok
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| obj_err(path, lineno, "malformed vertex"))?;
                }
                vertices.push(Vector3::from(coord));
            }
            Some("f") => {
                let idx: Vec<usize> = tok
                    .map(|t| {
                        face_index(t)
                            .ok_or_else(|| obj_err(path, lineno, format!("bad face index '{t}'")))
                    })
                    .collect::<Result<_>>()?;
                if idx.len() != 3 {
                    return Err(obj_err(
                        path,
                        lineno,
                        format!("face has {} vertices, only triangles are supported", idx.len()),
                    ));
                }
                let mut vs = [Vector3::zeros(); 3];
                for (slot, &i) in idx.iter().enumerate() {
                    if i == 0 || i > vertices.len() {
                        return Err(obj_err(path, lineno, format!("vertex index {i} out of range")));
                    }
                    vs[slot] = vertices[i - 1];
                }
                triangles.push(SoupTriangle {
                    v1: vs[0],
                    v2: vs[1],
                    v3: vs[2],
                    rest_len2: (vs[1] - vs[0]).norm(),
                    rest_len3: (vs[2] - vs[0]).norm(),
                    source_index: triangles.len(),
                    opacity: OBJ_DEFAULT_OPACITY,
                    normal: [0.0; 3],
                    sh_dc: [0.0; 3],
                    sh_rest: vec![],
                });
            }
            // comments and unsupported record types are skipped
            _ => {}
        }
    }
    Ok(triangles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splat::{triangle_to_gauss, SceneMeta, DEFAULT_EPS};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_reproduces_covariance_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        let scene = GaussianScene {
            gaussians: (0..50)
                .map(|_| crate::splat::tests::random_flat(&mut rng, DEFAULT_EPS))
                .collect(),
            meta: SceneMeta::default(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("soup.obj");
        write_obj(&scene, &path).unwrap();
        let tris = read_obj(&path).unwrap();
        assert_eq!(tris.len(), scene.gaussians.len());
        for (t, g) in tris.iter().zip(&scene.gaussians) {
            let back = triangle_to_gauss(t, DEFAULT_EPS).unwrap();
            // shortest round-trip float printing is lossless for f64
            assert_eq!(back.mean, g.mean);
            assert!((back.covariance() - g.covariance()).norm() < 1e-9);
        }
    }

    #[test]
    fn skips_comments_and_normals() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.obj");
        std::fs::write(
            &path,
            "# soup\nvn 0 0 1\nv 0 0 0\nv 1 0 0\nv 0 1 0\ns off\nf 1/1/1 2/2/1 3/3/1\n",
        )
        .unwrap();
        let tris = read_obj(&path).unwrap();
        assert_eq!(tris.len(), 1);
        assert_eq!(tris[0].v2, Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(tris[0].opacity, OBJ_DEFAULT_OPACITY);
    }

    #[test]
    fn rejects_quad_faces_with_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.obj");
        std::fs::write(&path, "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3 4\n").unwrap();
        match read_obj(&path) {
            Err(Error::ObjParse { line: 5, message, .. }) => {
                assert!(message.contains("triangles"))
            }
            other => panic!("expected obj parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_out_of_range_index() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o.obj");
        std::fs::write(&path, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n").unwrap();
        match read_obj(&path) {
            Err(Error::ObjParse { line: 4, .. }) => {}
            other => panic!("expected obj parse error, got {other:?}"),
        }
    }
}
