//! On-disk dataset format: a JSON manifest in the style of the common
//! synthetic NeRF scenes (`camera_angle_x` plus one 4×4 camera-to-world
//! matrix per frame) with split tags and optional ground-truth paths.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{is_rigid, Aabb, Mat4};
use crate::io::{read_rgb_png, IoError};
use crate::oracle::Slab;
use crate::render::{Camera, RayBounds};

pub const MANIFEST_NAME: &str = "transforms.json";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("frame {index} ({file}): transform is not rigid (rotation must be orthonormal with det +1)")]
    NonRigid { index: usize, file: String },
    #[error("frame {index}: missing image file {path}")]
    MissingFile { index: usize, path: PathBuf },
    #[error("frame {index} ({path}): image is {got_w}x{got_h}, manifest declares {want_w}x{want_h}")]
    Resolution {
        index: usize,
        path: PathBuf,
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("dataset has no {0} frames")]
    EmptySplit(Split),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    /// Image path relative to the manifest directory.
    pub file_path: String,
    pub transform_matrix: Mat4,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_path: Option<String>,
    /// Reflection-only ground-truth image.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflection_path: Option<String>,
}

/// Ground truth written by the scene generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// XYZ file of points on the glass boundary planes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub glass_points: Option<String>,
    /// Centimetres per unit of the 16-bit depth images.
    pub depth_scale: f64,
    pub slabs: Vec<Slab>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    /// Horizontal field of view in radians.
    pub camera_angle_x: f64,
    pub width: usize,
    pub height: usize,
    /// Length unit of every coordinate in the file.
    #[serde(default = "default_units")]
    pub units: String,
    pub near: f64,
    pub far: f64,
    /// Optional sampling box; rays are clipped to it when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aabb: Option<Aabb>,
    pub frames: Vec<Frame>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruth>,
    /// Free-form record of how the dataset was produced.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub generator: serde_json::Value,
}

fn default_units() -> String {
    "cm".into()
}

impl DatasetManifest {
    pub fn camera(&self, frame: &Frame) -> Camera {
        Camera::from_fov(self.width, self.height, self.camera_angle_x, frame.transform_matrix)
    }

    pub fn bounds(&self) -> RayBounds {
        RayBounds {
            near: self.near,
            far: self.far,
            aabb: self.aabb,
        }
    }

    pub fn frames_in(&self, split: Split) -> impl Iterator<Item = (usize, &Frame)> {
        self.frames.iter().enumerate().filter(move |(_, f)| f.split == split)
    }

    /// Scene extent: longest side of the sampling box, or the depth range.
    pub fn extent(&self) -> f64 {
        self.aabb.map_or(self.far - self.near, |b| b.extent())
    }

    /// Reads and validates `dir/transforms.json` (or a manifest file path).
    pub fn load(path: &Path) -> Result<(Self, PathBuf), DatasetError> {
        let file = if path.is_dir() {
            path.join(MANIFEST_NAME)
        } else {
            path.to_path_buf()
        };
        let root = file.parent().map(Path::to_path_buf).unwrap_or_default();
        let text = fs::read_to_string(&file).map_err(|e| IoError::file(&file, e))?;
        let manifest: DatasetManifest = serde_json::from_str(&text).map_err(|e| DatasetError::Manifest {
            path: file.clone(),
            message: e.to_string(),
        })?;
        manifest.validate(&root, &file)?;
        Ok((manifest, root))
    }

    fn validate(&self, root: &Path, file: &Path) -> Result<(), DatasetError> {
        let bad = |message: String| DatasetError::Manifest {
            path: file.to_path_buf(),
            message,
        };
        if !(self.camera_angle_x > 0.0 && self.camera_angle_x < std::f64::consts::PI) {
            return Err(bad(format!("camera_angle_x {} outside (0, π)", self.camera_angle_x)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(bad("zero image size".into()));
        }
        if !(self.near >= 0.0 && self.far > self.near) {
            return Err(bad(format!("invalid depth range [{}, {}]", self.near, self.far)));
        }
        for (index, frame) in self.frames.iter().enumerate() {
            if !is_rigid(&frame.transform_matrix, 1e-6) {
                return Err(DatasetError::NonRigid {
                    index,
                    file: frame.file_path.clone(),
                });
            }
            let path = resolve_image(root, &frame.file_path).ok_or_else(|| DatasetError::MissingFile {
                index,
                path: root.join(&frame.file_path),
            })?;
            let (w, h) = image::image_dimensions(&path).map_err(|e| IoError::Image {
                path: path.clone(),
                message: e.to_string(),
            })?;
            if (w as usize, h as usize) != (self.width, self.height) {
                return Err(DatasetError::Resolution {
                    index,
                    path,
                    got_w: w as usize,
                    got_h: h as usize,
                    want_w: self.width,
                    want_h: self.height,
                });
            }
        }
        Ok(())
    }
}

/// Finds a frame image, trying `.png` when the path has no extension.
fn resolve_image(root: &Path, rel: &str) -> Option<PathBuf> {
    let p = root.join(rel);
    if p.is_file() {
        return Some(p);
    }
    let with_ext = root.join(format!("{rel}.png"));
    with_ext.is_file().then_some(with_ext)
}

/// A posed image held in memory.
#[derive(Clone, Debug)]
pub struct View {
    pub index: usize,
    pub camera: Camera,
    /// Interleaved RGB in `[0, 1]`.
    pub rgb: Vec<f64>,
}

/// Manifest plus decoded images of one split.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub root: PathBuf,
    pub views: Vec<View>,
}

impl Dataset {
    pub fn load(path: &Path, split: Split) -> Result<Self, DatasetError> {
        let (manifest, root) = DatasetManifest::load(path)?;
        let mut views = Vec::new();
        for (index, frame) in manifest.frames_in(split) {
            let file = resolve_image(&root, &frame.file_path).expect("validated");
            let (_, _, rgb) = read_rgb_png(&file)?;
            views.push(View {
                index,
                camera: manifest.camera(frame),
                rgb,
            });
        }
        if views.is_empty() {
            return Err(DatasetError::EmptySplit(split));
        }
        Ok(Self { manifest, root, views })
    }

    /// Absolute path of a ground-truth file named in the manifest.
    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }
}
