//! Binary little-endian PLY checkpoints in the de-facto Gaussian Splatting
//! layout.
//!
//! On-disk encodings: scales are stored as natural logs, opacity as a logit,
//! rotation as a (w, x, y, z) quaternion that is not necessarily normalized.
//! The writer emits properties in the fixed order
//! `x y z nx ny nz f_dc_0..2 f_rest_* opacity scale_0..2 rot_0..3`.

use std::io::Write;
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::splat::{flatten, FlatGaussian, Gaussian, GaussianScene, SceneMeta};

/// Opacity logit clamp: exact 0/1 opacities are unencodable in logit space.
const LOGIT_CLAMP: f64 = 15.0;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn parse_err(path: &Path, offset: u64, message: impl Into<String>) -> Error {
    Error::PlyParse {
        path: path.to_path_buf(),
        offset,
        message: message.into(),
    }
}

struct Header {
    count: usize,
    properties: Vec<String>,
    payload_start: usize,
}

fn parse_header(path: &Path, data: &[u8]) -> Result<Header> {
    let mut pos = 0usize;
    let mut lines = Vec::new();
    loop {
        let rest = &data[pos..];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| parse_err(path, pos as u64, "header truncated before end_header"))?;
        let line = std::str::from_utf8(&rest[..nl])
            .map_err(|_| parse_err(path, pos as u64, "non-utf8 header line"))?
            .trim_end_matches('\r')
            .to_string();
        let line_start = pos;
        pos += nl + 1;
        if line == "end_header" {
            lines.push((line_start, line));
            break;
        }
        lines.push((line_start, line));
    }

    let mut it = lines.iter();
    let (off, magic) = it.next().ok_or_else(|| parse_err(path, 0, "empty file"))?;
    if magic != "ply" {
        return Err(parse_err(path, *off as u64, "missing ply magic"));
    }
    let mut count = None;
    let mut properties = Vec::new();
    let mut format_seen = false;
    let mut in_vertex = false;
    for (off, line) in it {
        let off = *off as u64;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                let f = tok.next().unwrap_or("");
                if f != "binary_little_endian" {
                    return Err(parse_err(path, off, format!("unsupported format '{f}'")));
                }
                format_seen = true;
            }
            Some("comment") => {}
            Some("element") => {
                let name = tok.next().unwrap_or("");
                if name != "vertex" {
                    return Err(parse_err(path, off, format!("unsupported element '{name}'")));
                }
                let n: usize = tok
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| parse_err(path, off, "bad vertex count"))?;
                count = Some(n);
                in_vertex = true;
            }
            Some("property") => {
                if !in_vertex {
                    return Err(parse_err(path, off, "property outside vertex element"));
                }
                let ty = tok.next().unwrap_or("");
                if ty != "float" {
                    return Err(parse_err(path, off, format!("unsupported property type '{ty}'")));
                }
                let name = tok
                    .next()
                    .ok_or_else(|| parse_err(path, off, "property missing name"))?;
                properties.push(name.to_string());
            }
            Some("end_header") => {}
            other => {
                return Err(parse_err(
                    path,
                    off,
                    format!("unexpected header token {other:?}"),
                ))
            }
        }
    }
    if !format_seen {
        return Err(parse_err(path, 0, "missing format line"));
    }
    let count = count.ok_or_else(|| parse_err(path, 0, "missing vertex element"))?;
    Ok(Header {
        count,
        properties,
        payload_start: pos,
    })
}

const REQUIRED: &[&str] = &[
    "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2",
    "rot_0", "rot_1", "rot_2", "rot_3",
];

fn prop_index(header: &Header, path: &Path, name: &str) -> Result<usize> {
    header
        .properties
        .iter()
        .position(|p| p == name)
        .ok_or_else(|| parse_err(path, 0, format!("missing required property '{name}'")))
}

/// Read a Gaussian Splatting checkpoint, decoding the stored fields and
/// flattening each component with flatness constant `eps`.
pub fn read_ply_with_eps(path: &Path, eps: f64) -> Result<GaussianScene> {
    let data = std::fs::read(path)?;
    let header = parse_header(path, &data)?;

    for p in &header.properties {
        let known = REQUIRED.contains(&p.as_str())
            || matches!(p.as_str(), "nx" | "ny" | "nz")
            || p.starts_with("f_rest_");
        if !known {
            return Err(parse_err(path, 0, format!("unsupported property '{p}'")));
        }
    }
    let n_rest = header
        .properties
        .iter()
        .filter(|p| p.starts_with("f_rest_"))
        .count();
    if n_rest % 3 != 0 {
        return Err(parse_err(path, 0, format!("f_rest count {n_rest} not divisible by 3")));
    }
    let sh_degree = match n_rest / 3 {
        0 => 0u8,
        3 => 1,
        8 => 2,
        15 => 3,
        other => {
            return Err(parse_err(
                path,
                0,
                format!("unsupported SH coefficient count {other}"),
            ))
        }
    };

    let idx = |name: &str| prop_index(&header, path, name);
    let ix = [idx("x")?, idx("y")?, idx("z")?];
    let has_normals = header.properties.iter().any(|p| p == "nx");
    let inrm = if has_normals {
        Some([idx("nx")?, idx("ny")?, idx("nz")?])
    } else {
        None
    };
    let idc = [idx("f_dc_0")?, idx("f_dc_1")?, idx("f_dc_2")?];
    let irest: Vec<usize> = (0..n_rest)
        .map(|i| idx(&format!("f_rest_{i}")))
        .collect::<Result<_>>()?;
    let iop = idx("opacity")?;
    let isc = [idx("scale_0")?, idx("scale_1")?, idx("scale_2")?];
    let irot = [idx("rot_0")?, idx("rot_1")?, idx("rot_2")?, idx("rot_3")?];

    let nprops = header.properties.len();
    let record_size = nprops * 4;
    let payload = &data[header.payload_start..];
    if payload.len() < header.count * record_size {
        return Err(parse_err(
            path,
            (header.payload_start + payload.len()) as u64,
            format!(
                "truncated payload: need {} bytes, have {}",
                header.count * record_size,
                payload.len()
            ),
        ));
    }

    let mut gaussians = Vec::with_capacity(header.count);
    let mut fields = vec![0f32; nprops];
    for rec in 0..header.count {
        let mut cursor = &payload[rec * record_size..(rec + 1) * record_size];
        for f in fields.iter_mut() {
            *f = cursor.read_f32::<LittleEndian>().map_err(|_| {
                parse_err(
                    path,
                    (header.payload_start + rec * record_size) as u64,
                    "short read",
                )
            })?;
        }
        let mean = Vector3::new(fields[ix[0]] as f64, fields[ix[1]] as f64, fields[ix[2]] as f64);
        let normal = match inrm {
            Some(i) => [fields[i[0]], fields[i[1]], fields[i[2]]],
            None => [0.0; 3],
        };
        let scales = [
            (fields[isc[0]] as f64).exp(),
            (fields[isc[1]] as f64).exp(),
            (fields[isc[2]] as f64).exp(),
        ];
        let opacity = sigmoid(fields[iop] as f64);
        let q = Quaternion::new(
            fields[irot[0]] as f64,
            fields[irot[1]] as f64,
            fields[irot[2]] as f64,
            fields[irot[3]] as f64,
        );
        if q.norm() <= 0.0 {
            return Err(parse_err(
                path,
                (header.payload_start + rec * record_size) as u64,
                format!("gaussian {rec}: zero quaternion"),
            ));
        }
        let rotation = UnitQuaternion::from_quaternion(q)
            .to_rotation_matrix()
            .into_inner();
        let g = Gaussian {
            mean,
            rotation,
            scales,
            opacity,
            normal,
            sh_dc: [fields[idc[0]], fields[idc[1]], fields[idc[2]]],
            sh_rest: irest.iter().map(|&i| fields[i]).collect(),
        };
        gaussians.push(flatten(&g, eps, rec)?);
    }

    Ok(GaussianScene {
        gaussians,
        meta: SceneMeta {
            source: Some(path.to_path_buf()),
            eps,
            sh_degree,
        },
    })
}

pub fn read_ply(path: &Path) -> Result<GaussianScene> {
    read_ply_with_eps(path, crate::splat::DEFAULT_EPS)
}

/// Quaternion encoding that is a fixpoint of decode-normalize-reencode, so a
/// written file re-reads and re-writes byte-identically.
fn stable_quat_f32(rotation: &Matrix3<f64>) -> [f32; 4] {
    // one decode-reencode cycle of the reader/writer pair
    let cycle = |q32: [f32; 4]| -> [f32; 4] {
        let q = Quaternion::new(q32[0] as f64, q32[1] as f64, q32[2] as f64, q32[3] as f64);
        let r = UnitQuaternion::from_quaternion(q).to_rotation_matrix();
        let mut n = UnitQuaternion::from_rotation_matrix(&r).into_inner();
        if n.w < 0.0 || (n.w == 0.0 && n.i < 0.0) {
            n = -n;
        }
        [n.w as f32, n.i as f32, n.j as f32, n.k as f32]
    };
    let mut q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*rotation))
        .into_inner();
    if q.w < 0.0 || (q.w == 0.0 && q.i < 0.0) {
        q = -q;
    }
    let mut out = [q.w as f32, q.i as f32, q.j as f32, q.k as f32];
    for _ in 0..16 {
        let next = cycle(out);
        if next == out {
            break;
        }
        out = next;
    }
    out
}

fn encode_record<W: Write>(w: &mut W, g: &FlatGaussian) -> Result<()> {
    for v in [g.mean.x, g.mean.y, g.mean.z] {
        w.write_f32::<LittleEndian>(v as f32)?;
    }
    for v in g.normal {
        w.write_f32::<LittleEndian>(v)?;
    }
    for v in g.sh_dc {
        w.write_f32::<LittleEndian>(v)?;
    }
    for v in &g.sh_rest {
        w.write_f32::<LittleEndian>(*v)?;
    }
    let op = g.opacity.clamp(sigmoid(-LOGIT_CLAMP), sigmoid(LOGIT_CLAMP));
    let stored_op = logit(op).clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
    w.write_f32::<LittleEndian>(stored_op as f32)?;
    for s in g.scales {
        w.write_f32::<LittleEndian>(s.ln() as f32)?;
    }
    for v in stable_quat_f32(&g.rotation) {
        w.write_f32::<LittleEndian>(v)?;
    }
    Ok(())
}

/// Write a flat-Gaussian scene as a standard GS checkpoint. Slot 1 stores
/// `ln(eps)`; opacity logits are clamped to +/-15 to stay finite in float32.
pub fn write_ply(scene: &GaussianScene, path: &Path) -> Result<()> {
    let n_rest = scene
        .gaussians
        .first()
        .map(|g| g.sh_rest.len())
        .unwrap_or(0);
    if scene.gaussians.iter().any(|g| g.sh_rest.len() != n_rest) {
        return Err(Error::Config(
            "inconsistent SH coefficient counts across gaussians".into(),
        ));
    }
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write!(w, "ply\nformat binary_little_endian 1.0\n")?;
    writeln!(w, "element vertex {}", scene.gaussians.len())?;
    for name in ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"] {
        writeln!(w, "property float {name}")?;
    }
    for i in 0..n_rest {
        writeln!(w, "property float f_rest_{i}")?;
    }
    for name in ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"] {
        writeln!(w, "property float {name}")?;
    }
    writeln!(w, "end_header")?;
    for g in &scene.gaussians {
        encode_record(&mut w, g)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splat::DEFAULT_EPS;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn scene(n: usize) -> GaussianScene {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        GaussianScene {
            gaussians: (0..n)
                .map(|_| crate::splat::tests::random_flat(&mut rng, DEFAULT_EPS))
                .collect(),
            meta: SceneMeta {
                source: None,
                eps: DEFAULT_EPS,
                sh_degree: 1,
            },
        }
    }

    fn minimal_identity_ply(dir: &Path) -> std::path::PathBuf {
        // one gaussian: ln-scale 0 (scale 1), identity quaternion, opacity logit 0
        let path = dir.join("one.ply");
        let mut bytes = Vec::new();
        let mut header = String::from("ply\nformat binary_little_endian 1.0\nelement vertex 1\n");
        for name in [
            "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1",
            "scale_2", "rot_0", "rot_1", "rot_2", "rot_3",
        ] {
            header.push_str(&format!("property float {name}\n"));
        }
        header.push_str("end_header\n");
        bytes.extend_from_slice(header.as_bytes());
        let fields: [f32; 14] = [
            0.5, 0.25, -0.5, // mean
            0.1, 0.2, 0.3, // dc
            0.0, // opacity logit
            0.0, 0.0, 0.0, // ln scales -> 1,1,1
            1.0, 0.0, 0.0, 0.0, // identity quaternion
        ];
        for f in fields {
            bytes.extend_from_slice(&f.to_le_bytes());
        }
        std::fs::write(&path, bytes).unwrap();
        path
    }

    #[test]
    fn reads_minimal_identity_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = minimal_identity_ply(dir.path());
        let scene = read_ply(&path).unwrap();
        assert_eq!(scene.gaussians.len(), 1);
        let g = &scene.gaussians[0];
        // three unit scales pre-flatten; tie broken toward axis 0
        assert_eq!(g.scales[0], DEFAULT_EPS);
        assert_eq!(g.scales[1], 1.0);
        assert_eq!(g.scales[2], 1.0);
        assert!((g.opacity - 0.5).abs() < 1e-12);
        assert_eq!(g.mean, Vector3::new(0.5, 0.25, -0.5));
        assert_eq!(scene.meta.sh_degree, 0);
    }

    #[test]
    fn rejects_ascii_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ascii.ply");
        std::fs::write(&path, "ply\nformat ascii 1.0\nelement vertex 0\nend_header\n").unwrap();
        match read_ply(&path) {
            Err(Error::PlyParse { message, .. }) => assert!(message.contains("ascii")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_truncated_payload() {
        let dir = tempfile::tempdir().unwrap();
        let path = minimal_identity_ply(dir.path());
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 8);
        std::fs::write(&path, bytes).unwrap();
        match read_ply(&path) {
            Err(Error::PlyParse { message, .. }) => assert!(message.contains("truncated")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_missing_required_property() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ply");
        std::fs::write(
            &path,
            "ply\nformat binary_little_endian 1.0\nelement vertex 0\nproperty float x\nend_header\n",
        )
        .unwrap();
        match read_ply(&path) {
            Err(Error::PlyParse { message, .. }) => assert!(message.contains("missing required")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn write_read_write_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let s = scene(64);
        let p1 = dir.path().join("a.ply");
        let p2 = dir.path().join("b.ply");
        write_ply(&s, &p1).unwrap();
        let back = read_ply(&p1).unwrap();
        write_ply(&back, &p2).unwrap();
        let b1 = std::fs::read(&p1).unwrap();
        let b2 = std::fs::read(&p2).unwrap();
        assert_eq!(b1, b2);
    }

    #[test]
    fn round_trip_preserves_decoded_fields() {
        let dir = tempfile::tempdir().unwrap();
        let s = scene(32);
        let p = dir.path().join("rt.ply");
        write_ply(&s, &p).unwrap();
        let back = read_ply(&p).unwrap();
        for (a, b) in s.gaussians.iter().zip(&back.gaussians) {
            assert!((a.covariance() - b.covariance()).norm() < 1e-6);
            assert!((a.mean - b.mean).norm() < 1e-6);
            assert!((a.opacity - b.opacity).abs() < 1e-6);
            assert_eq!(a.sh_dc, b.sh_dc);
            assert_eq!(a.sh_rest, b.sh_rest);
        }
    }

    #[test]
    fn opacity_one_is_clamped_to_logit_15() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = scene(1);
        s.gaussians[0].opacity = 1.0;
        let p = dir.path().join("clamp.ply");
        write_ply(&s, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        // opacity is the first field after dc+rest in our layout
        let header_end = bytes.windows(11).position(|w| w == b"end_header\n").unwrap() + 11;
        let n_rest = s.gaussians[0].sh_rest.len();
        let op_off = header_end + (9 + n_rest) * 4;
        let stored = f32::from_le_bytes(bytes[op_off..op_off + 4].try_into().unwrap());
        assert_eq!(stored, 15.0);
    }

    #[test]
    fn stored_flat_scale_is_ln_eps() {
        let dir = tempfile::tempdir().unwrap();
        let s = scene(1);
        let p = dir.path().join("eps.ply");
        write_ply(&s, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        let header_end = bytes.windows(11).position(|w| w == b"end_header\n").unwrap() + 11;
        let n_rest = s.gaussians[0].sh_rest.len();
        let sc_off = header_end + (9 + n_rest + 1) * 4;
        let stored = f32::from_le_bytes(bytes[sc_off..sc_off + 4].try_into().unwrap());
        assert_eq!(stored, (DEFAULT_EPS.ln()) as f32);
    }
}
