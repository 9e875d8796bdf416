//! Posed-image dataset generation from an analytic scene.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::optics::Slab;
use super::scene::{Orbit, SceneSpec};
use super::trace::{render_view, OracleView};
use super::OracleError;
use crate::dataset::{DatasetManifest, Frame, GroundTruth, Split, MANIFEST_NAME};
use crate::geometry::{look_at, Mat4, Vec3};
use crate::io::{write_depth_png, write_rgb_png, write_xyz, IoError};
use crate::render::Camera;

/// Depth images store centimetres in units of this value.
pub const DEPTH_SCALE: f64 = 1e-3;

/// Spacing of the ground-truth glass point grid (cm).
pub const GLASS_POINT_SPACING: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    pub const DESK: SplitCounts = SplitCounts {
        train: 40,
        val: 8,
        test: 8,
    };
    pub const LARGE: SplitCounts = SplitCounts {
        train: 200,
        val: 25,
        test: 25,
    };

    pub fn of(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub counts: SplitCounts,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            counts: SplitCounts::DESK,
            width: 64,
            height: 64,
            seed: 7,
        }
    }
}

/// Camera-to-world matrices on the scene's orbit, drawn uniformly in
/// azimuth and elevation from a per-split random stream.
pub fn orbit_poses(orbit: &Orbit, count: usize, seed: u64, split: Split) -> Vec<Mat4> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(split as u64 + 1);
    (0..count)
        .map(|_| {
            let az = rng.gen_range(orbit.azimuth[0]..=orbit.azimuth[1]).to_radians();
            let el = rng.gen_range(orbit.elevation[0]..=orbit.elevation[1]).to_radians();
            orbit_pose(orbit, az, el)
        })
        .collect()
}

/// Pose at azimuth/elevation in radians.
pub fn orbit_pose(orbit: &Orbit, azimuth: f64, elevation: f64) -> Mat4 {
    let offset = Vec3::new(
        elevation.cos() * azimuth.sin(),
        elevation.sin(),
        elevation.cos() * azimuth.cos(),
    ) * orbit.radius;
    look_at(orbit.target + offset, orbit.target, Vec3::new(0.0, 1.0, 0.0))
}

/// Points on a regular grid covering both faces of every slab.
pub fn glass_surface_points(slabs: &[Slab], spacing: f64) -> Vec<Vec3> {
    let mut pts = Vec::new();
    for s in slabs {
        let (u, v) = s.tangents();
        let nu = (2.0 * s.half_u / spacing).round() as i64;
        let nv = (2.0 * s.half_v / spacing).round() as i64;
        for (p, _) in s.faces() {
            for i in 0..=nu {
                for j in 0..=nv {
                    let a = -s.half_u + 2.0 * s.half_u * i as f64 / nu.max(1) as f64;
                    let b = -s.half_v + 2.0 * s.half_v * j as f64 / nv.max(1) as f64;
                    pts.push(p + u * a + v * b);
                }
            }
        }
    }
    pts
}

/// Default sampling interval for a scene's orbit.
pub fn depth_range(scene: &SceneSpec) -> (f64, f64) {
    let r = scene.orbit.radius;
    let e = scene.extent();
    ((r - e).max(0.1), r + e)
}

/// The camera for a pose in a generated dataset.
pub fn camera_for(scene: &SceneSpec, config: &GenerateConfig, pose: Mat4) -> Camera {
    Camera::from_fov(config.width, config.height, scene.orbit.fov_x.to_radians(), pose)
}

/// Renders every split, writes images, depth, reflection-only images, the
/// glass point list and the manifest into `out`, and returns the manifest.
pub fn generate_dataset(
    scene: &SceneSpec,
    config: &GenerateConfig,
    out: &Path,
) -> Result<DatasetManifest, OracleError> {
    scene.validate()?;
    if config.counts.train == 0 || config.counts.val == 0 || config.counts.test == 0 {
        return Err(OracleError::InvalidScene("every split needs at least one view".into()));
    }
    if config.width == 0 || config.height == 0 {
        return Err(OracleError::InvalidScene("zero image size".into()));
    }
    fs::create_dir_all(out).map_err(|e| IoError::file(out, e))?;

    let mut frames = Vec::new();
    let mut truncated = 0;
    for split in [Split::Train, Split::Val, Split::Test] {
        let poses = orbit_poses(&scene.orbit, config.counts.of(split), config.seed, split);
        for (i, pose) in poses.into_iter().enumerate() {
            let view: OracleView = render_view(scene, &camera_for(scene, config, pose));
            truncated += view.truncated;
            let stem = format!("{split}_{i:03}");
            let file_path = format!("images/{stem}.png");
            let depth_path = format!("depth/{stem}.png");
            let reflection_path = format!("reflection/{stem}.png");
            write_rgb_png(&out.join(&file_path), view.width, view.height, &view.color)?;
            write_depth_png(
                &out.join(&depth_path),
                view.width,
                view.height,
                &view.depth,
                DEPTH_SCALE,
            )?;
            write_rgb_png(&out.join(&reflection_path), view.width, view.height, &view.reflection)?;
            frames.push(Frame {
                file_path,
                transform_matrix: pose,
                split,
                depth_path: Some(depth_path),
                reflection_path: Some(reflection_path),
            });
        }
    }

    let glass_points = if scene.slabs.is_empty() {
        None
    } else {
        write_xyz(
            &out.join("glass.xyz"),
            &glass_surface_points(&scene.slabs, GLASS_POINT_SPACING),
        )?;
        Some("glass.xyz".to_string())
    };
    let (near, far) = depth_range(scene);
    let manifest = DatasetManifest {
        camera_angle_x: scene.orbit.fov_x.to_radians(),
        width: config.width,
        height: config.height,
        units: "cm".into(),
        near,
        far,
        aabb: Some(scene.bounds),
        frames,
        ground_truth: Some(GroundTruth {
            glass_points,
            depth_scale: DEPTH_SCALE,
            slabs: scene.slabs.clone(),
        }),
        generator: serde_json::json!({
            "scene": scene,
            "config": config,
            "truncated_pixels": truncated,
        }),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    let path = out.join(MANIFEST_NAME);
    fs::write(&path, text).map_err(|e| IoError::file(&path, e))?;
    Ok(manifest)
}
