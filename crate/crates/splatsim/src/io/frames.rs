//! Frame-sequence output: numbered PLY/OBJ files plus a JSONL run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::OutputFormat;
use crate::error::Result;
use crate::io::{obj::write_obj, ply::write_ply};
use crate::pipeline::FrameResult;

#[derive(Serialize)]
struct ManifestLine {
    frame: usize,
    time: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mass: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    momentum: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_speed: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    escaped: Option<usize>,
}

/// Writes `frame_%05d.{ply,obj}` into a directory and appends one JSON line
/// per frame to `manifest.jsonl`.
pub struct FrameWriter {
    dir: PathBuf,
    formats: Vec<OutputFormat>,
    manifest: std::io::BufWriter<std::fs::File>,
}

impl FrameWriter {
    pub fn new(dir: &Path, formats: &[OutputFormat]) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let manifest = std::io::BufWriter::new(std::fs::File::create(dir.join("manifest.jsonl"))?);
        Ok(Self {
            dir: dir.to_path_buf(),
            formats: formats.to_vec(),
            manifest,
        })
    }

    pub fn frame_path(&self, index: usize, format: OutputFormat) -> PathBuf {
        let ext = match format {
            OutputFormat::Ply => "ply",
            OutputFormat::Obj => "obj",
        };
        self.dir.join(format!("frame_{index:05}.{ext}"))
    }

    pub fn write_frame(&mut self, frame: &FrameResult) -> Result<()> {
        for &f in &self.formats {
            let path = self.frame_path(frame.index, f);
            match f {
                OutputFormat::Ply => write_ply(&frame.scene, &path)?,
                OutputFormat::Obj => write_obj(&frame.scene, &path)?,
            }
        }
        let line = ManifestLine {
            frame: frame.index,
            time: frame.time,
            mass: frame.diag.map(|d| d.mass),
            momentum: frame.diag.map(|d| d.momentum),
            max_speed: frame.diag.map(|d| d.max_speed),
            escaped: frame.diag.map(|d| d.escaped),
        };
        serde_json::to_writer(&mut self.manifest, &line)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::Other, e))?;
        self.manifest.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.manifest.flush()?;
        Ok(())
    }
}
