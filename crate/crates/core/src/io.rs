//! PNG, depth and point-cloud file helpers shared by the generator, the
//! renderer front-end and the evaluator.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma, Rgb};
use thiserror::Error;

use crate::geometry::Vec3;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl IoError {
    pub fn file(path: &Path, source: std::io::Error) -> Self {
        IoError::File {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Rounds a `[0, 1]` value to 8 bits (values are clamped first).
pub fn quantize8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn ensure_parent(path: &Path) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| IoError::file(dir, e))?;
    }
    Ok(())
}

fn image_err(path: &Path, e: image::ImageError) -> IoError {
    match e {
        image::ImageError::IoError(source) => IoError::file(path, source),
        other => IoError::Image {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}

/// Writes interleaved RGB in `[0, 1]` as an 8-bit PNG.
pub fn write_rgb_png(path: &Path, width: usize, height: usize, rgb: &[f64]) -> Result<(), IoError> {
    ensure_parent(path)?;
    let bytes: Vec<u8> = rgb.iter().map(|&v| quantize8(v)).collect();
    let img: ImageBuffer<Rgb<u8>, _> =
        ImageBuffer::from_raw(width as u32, height as u32, bytes).ok_or_else(|| IoError::Image {
            path: path.to_path_buf(),
            message: format!("buffer of {} values is not {width}x{height} RGB", rgb.len()),
        })?;
    img.save(path).map_err(|e| image_err(path, e))
}

/// Reads a PNG as interleaved RGB in `[0, 1]`; alpha, when present, is
/// composited onto white.
pub fn read_rgb_png(path: &Path) -> Result<(usize, usize, Vec<f64>), IoError> {
    let img = image::open(path).map_err(|e| image_err(path, e))?.to_rgba8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut out = Vec::with_capacity(w * h * 3);
    for px in img.pixels() {
        let a = px[3] as f64 / 255.0;
        for c in 0..3 {
            out.push(px[c] as f64 / 255.0 * a + (1.0 - a));
        }
    }
    Ok((w, h, out))
}

/// Writes depths as a 16-bit grayscale PNG storing `round(depth / scale)`.
pub fn write_depth_png(path: &Path, width: usize, height: usize, depth: &[f64], scale: f64) -> Result<(), IoError> {
    ensure_parent(path)?;
    let values: Vec<u16> = depth
        .iter()
        .map(|&d| (d / scale).round().clamp(0.0, u16::MAX as f64) as u16)
        .collect();
    let img: ImageBuffer<Luma<u16>, _> =
        ImageBuffer::from_raw(width as u32, height as u32, values).ok_or_else(|| IoError::Image {
            path: path.to_path_buf(),
            message: format!("buffer of {} values is not {width}x{height}", depth.len()),
        })?;
    img.save(path).map_err(|e| image_err(path, e))
}

pub fn read_depth_png(path: &Path, scale: f64) -> Result<(usize, usize, Vec<f64>), IoError> {
    let img = image::open(path).map_err(|e| image_err(path, e))?.to_luma16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok((w, h, img.as_raw().iter().map(|&v| v as f64 * scale).collect()))
}

/// Plain-text point list, one `x y z` triple per line.
pub fn write_xyz(path: &Path, points: &[Vec3]) -> Result<(), IoError> {
    ensure_parent(path)?;
    let file = fs::File::create(path).map_err(|e| IoError::file(path, e))?;
    let mut w = BufWriter::new(file);
    for p in points {
        writeln!(w, "{} {} {}", p.x, p.y, p.z).map_err(|e| IoError::file(path, e))?;
    }
    w.flush().map_err(|e| IoError::file(path, e))
}

pub fn read_xyz(path: &Path) -> Result<Vec<Vec3>, IoError> {
    let file = fs::File::open(path).map_err(|e| IoError::file(path, e))?;
    let mut points = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| IoError::file(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
        match vals {
            Ok(v) if v.len() == 3 => points.push(Vec3::new(v[0], v[1], v[2])),
            _ => {
                return Err(IoError::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: format!("expected three numbers, got `{line}`"),
                })
            }
        }
    }
    Ok(points)
}
