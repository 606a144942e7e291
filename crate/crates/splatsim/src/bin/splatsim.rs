use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use splatsim::config::{read_scene_config, OutputFormat, SceneConfig};
use splatsim::correction::CorrectionConfig;
use splatsim::error::{Error, Result};
use splatsim::io::{read_obj, read_ply_with_eps, write_obj, write_ply, FrameWriter};
use splatsim::mpm::KernelDegree;
use splatsim::pipeline::{bind, body_force, build_mpm, run, MpmDeformation, RunSettings};
use splatsim::preview::{read_camera, render_preview};
use splatsim::splat::{triangle_to_gauss, GaussianScene, SceneMeta, DEFAULT_EPS};

#[derive(Parser)]
#[command(name = "splatsim", version, about = "Physics-driven animation of Gaussian Splatting scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KernelArg {
    Cubic,
    Quadratic,
}

impl From<KernelArg> for KernelDegree {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Cubic => KernelDegree::Cubic,
            KernelArg::Quadratic => KernelDegree::Quadratic,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a scene simulation and write the frame sequence.
    Simulate {
        /// Scene config (TOML). Asset paths resolve relative to this file.
        #[arg(long)]
        scene: PathBuf,
        /// Output directory for frames and the manifest.
        #[arg(long)]
        out: PathBuf,
        /// Override the scale-clip tolerance factor.
        #[arg(long)]
        alpha: Option<f64>,
        /// Force a bit-reproducible run.
        #[arg(long)]
        deterministic: bool,
        /// Override the transfer kernel degree.
        #[arg(long)]
        kernel: Option<KernelArg>,
    },
    /// Convert between Gaussian PLY checkpoints and OBJ triangle soups.
    Convert {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse a scene config and dry-run the binding invariants (no stepping).
    Validate {
        #[arg(long)]
        scene: PathBuf,
    },
    /// Render each frame PLY in a directory to a PNG still.
    Preview {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        camera: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_assets(cfg: &SceneConfig, scene_path: &Path) -> Result<Vec<GaussianScene>> {
    let base = scene_path.parent().unwrap_or(Path::new("."));
    cfg.objects
        .iter()
        .map(|o| read_ply_with_eps(&base.join(&o.asset), cfg.eps))
        .collect()
}

fn cmd_simulate(
    scene: &Path,
    out: &Path,
    alpha: Option<f64>,
    deterministic: bool,
    kernel: Option<KernelArg>,
) -> Result<()> {
    let mut cfg = read_scene_config(scene)?;
    if let Some(a) = alpha {
        if a <= 1.0 {
            return Err(Error::Config("alpha must exceed 1".into()));
        }
        cfg.alpha = a;
    }
    if deterministic {
        cfg.deterministic = true;
    }
    if let Some(k) = kernel {
        cfg.kernel = k.into();
    }

    let assets = load_assets(&cfg, scene)?;
    let bound = bind(&cfg, &assets)?;
    let state = build_mpm(&cfg, &bound)?;
    let mut deform = MpmDeformation::new(state, body_force(cfg.gravity, cfg.wind.clone()));

    let formats = cfg
        .output
        .as_ref()
        .map(|o| o.formats.clone())
        .unwrap_or_else(|| vec![OutputFormat::Ply]);
    let mut writer = FrameWriter::new(out, &formats)?;
    let settings = RunSettings {
        frame_rate: cfg.frame_rate,
        duration: cfg.duration,
        correction: CorrectionConfig::new(cfg.alpha, cfg.correction),
        eps: cfg.eps,
    };
    run(&bound, &settings, &mut deform, |frame| {
        writer.write_frame(frame)
    })?;
    writer.finish()?;
    println!(
        "wrote {} frames to {}",
        settings.frame_count(),
        out.display()
    );
    Ok(())
}

fn ext_of(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

fn cmd_convert(input: &Path, out: &Path) -> Result<()> {
    let scene = match ext_of(input).as_str() {
        "ply" => read_ply_with_eps(input, DEFAULT_EPS)?,
        "obj" => {
            let tris = read_obj(input)?;
            let gaussians = tris
                .iter()
                .map(|t| triangle_to_gauss(t, DEFAULT_EPS))
                .collect::<Result<_>>()?;
            GaussianScene {
                gaussians,
                meta: SceneMeta {
                    source: Some(input.to_path_buf()),
                    eps: DEFAULT_EPS,
                    sh_degree: 0,
                },
            }
        }
        other => {
            return Err(Error::Config(format!(
                "unsupported input extension '{other}' (expected ply or obj)"
            )))
        }
    };
    match ext_of(out).as_str() {
        "ply" => write_ply(&scene, out)?,
        "obj" => write_obj(&scene, out)?,
        other => {
            return Err(Error::Config(format!(
                "unsupported output extension '{other}' (expected ply or obj)"
            )))
        }
    }
    println!("converted {} gaussians", scene.gaussians.len());
    Ok(())
}

fn cmd_validate(scene: &Path) -> Result<()> {
    let cfg = read_scene_config(scene)?;
    let assets = load_assets(&cfg, scene)?;
    let bound = bind(&cfg, &assets)?;
    let state = build_mpm(&cfg, &bound)?;
    println!(
        "scene ok: {} particles ({} triangles, {} static gaussians)",
        state.particles.len(),
        bound.triangles.len(),
        bound.static_gaussians.len()
    );
    println!(
        "grid: {}x{}x{} nodes, h = {}, origin = ({}, {}, {})",
        state.grid.res[0],
        state.grid.res[1],
        state.grid.res[2],
        state.grid.h,
        state.grid.origin.x,
        state.grid.origin.y,
        state.grid.origin.z
    );
    Ok(())
}

fn cmd_preview(frames: &Path, camera: &Path, out: &Path) -> Result<()> {
    let cam = read_camera(camera)?;
    std::fs::create_dir_all(out)?;
    let mut ply_paths: Vec<PathBuf> = std::fs::read_dir(frames)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| ext_of(p) == "ply")
        .collect();
    ply_paths.sort();
    if ply_paths.is_empty() {
        return Err(Error::Config(format!(
            "no .ply frames found in {}",
            frames.display()
        )));
    }
    for path in &ply_paths {
        let scene = read_ply_with_eps(path, DEFAULT_EPS)?;
        let img = render_preview(&scene, &cam)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("frame");
        let png = out.join(format!("{stem}.png"));
        img.save(&png)
            .map_err(|e| Error::Config(format!("failed to write {}: {e}", png.display())))?;
    }
    println!("rendered {} frames to {}", ply_paths.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap prints help/version to stdout with success; everything
            // else is a usage error
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Simulate {
            scene,
            out,
            alpha,
            deterministic,
            kernel,
        } => cmd_simulate(scene, out, *alpha, *deterministic, *kernel),
        Command::Convert { input, out } => cmd_convert(input, out),
        Command::Validate { scene } => cmd_validate(scene),
        Command::Preview {
            frames,
            camera,
            out,
        } => cmd_preview(frames, camera, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
