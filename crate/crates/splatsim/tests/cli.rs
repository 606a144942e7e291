//! CLI behavior tests driven through the compiled binary.

use std::path::Path;
use std::process::Command;

use nalgebra::{Matrix3, Vector3};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use splatsim::io::{read_ply, write_ply};
use splatsim::splat::{FlatGaussian, GaussianScene, SceneMeta, DEFAULT_EPS};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_splatsim"))
}

fn small_scene(n: usize) -> GaussianScene {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let gaussians = (0..n)
        .map(|_| FlatGaussian {
            mean: Vector3::new(rng.gen(), rng.gen(), rng.gen::<f64>() + 0.2),
            rotation: nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
            ))
            .to_rotation_matrix()
            .into_inner(),
            scales: [
                DEFAULT_EPS,
                0.02 + 0.02 * rng.gen::<f64>(),
                0.02 + 0.02 * rng.gen::<f64>(),
            ],
            opacity: rng.gen(),
            normal: [0.0; 3],
            sh_dc: [rng.gen(), rng.gen(), rng.gen()],
            sh_rest: vec![],
        })
        .collect();
    GaussianScene {
        gaussians,
        meta: SceneMeta {
            source: None,
            eps: DEFAULT_EPS,
            sh_degree: 0,
        },
    }
}

fn write_scene_files(dir: &Path, material: &str) -> std::path::PathBuf {
    write_ply(&small_scene(20), &dir.join("asset.ply")).unwrap();
    let cfg = format!(
        r#"
        duration = 0.1
        frame_rate = 30
        [[materials]]
        name = "rubber"
        kind = "elastic"
        [[objects]]
        asset = "asset.ply"
        material = "{material}"
    "#
    );
    let path = dir.join("scene.toml");
    std::fs::write(&path, cfg).unwrap();
    path
}

#[test]
fn validate_prints_counts_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene_files(dir.path(), "rubber");
    let out = bin()
        .args(["validate", "--scene", scene.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("60 particles"), "{stdout}");
    assert!(stdout.contains("grid:"), "{stdout}");
}

#[test]
fn bad_material_reference_exits_one_and_names_object() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene_files(dir.path(), "steel");
    let out = bin()
        .args([
            "simulate",
            "--scene",
            scene.to_str().unwrap(),
            "--out",
            dir.path().join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("asset.ply") && stderr.contains("steel"), "{stderr}");
}

#[test]
fn unknown_flag_prints_usage_and_exits_one() {
    let out = bin().args(["simulate", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(text.to_lowercase().contains("usage"), "{text}");
}

#[test]
fn convert_round_trip_preserves_covariance() {
    let dir = tempfile::tempdir().unwrap();
    let scene = small_scene(30);
    let src = dir.path().join("in.ply");
    write_ply(&scene, &src).unwrap();
    let obj = dir.path().join("mid.obj");
    let back = dir.path().join("out.ply");
    for (i, o) in [(&src, &obj), (&obj, &back)] {
        let status = bin()
            .args(["convert", "--in", i.to_str().unwrap(), "--out", o.to_str().unwrap()])
            .status()
            .unwrap();
        assert!(status.success());
    }
    let result = read_ply(&back).unwrap();
    assert_eq!(result.gaussians.len(), scene.gaussians.len());
    for (a, b) in result.gaussians.iter().zip(&scene.gaussians) {
        assert!((a.covariance() - b.covariance()).norm() < 1e-6);
    }
}

#[test]
fn simulate_writes_frames_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene_files(dir.path(), "rubber");
    let out_dir = dir.path().join("frames");
    let status = bin()
        .args([
            "simulate",
            "--scene",
            scene.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    for i in 0..3 {
        assert!(out_dir.join(format!("frame_{i:05}.ply")).exists());
    }
    let manifest = std::fs::read_to_string(out_dir.join("manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 3);
    for line in manifest.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["mass"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn preview_renders_pngs() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    std::fs::create_dir_all(&frames).unwrap();
    write_ply(&small_scene(10), &frames.join("frame_00000.ply")).unwrap();
    let cam = dir.path().join("camera.toml");
    std::fs::write(
        &cam,
        "position = [0.5, -3.0, 0.7]\nlook_at = [0.5, 0.5, 0.7]\nwidth = 64\nheight = 48\n",
    )
    .unwrap();
    let out = dir.path().join("stills");
    let status = bin()
        .args([
            "preview",
            "--frames",
            frames.to_str().unwrap(),
            "--camera",
            cam.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let png = out.join("frame_00000.png");
    let img = image::open(&png).unwrap();
    assert_eq!(img.width(), 64);
    assert_eq!(img.height(), 48);
}

#[test]
fn convert_rejects_unknown_extension() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("in.ply");
    write_ply(&small_scene(3), &src).unwrap();
    let out = bin()
        .args([
            "convert",
            "--in",
            src.to_str().unwrap(),
            "--out",
            dir.path().join("x.gltf").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
