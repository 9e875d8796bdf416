//! Analytic ground truth: exact refraction through glass slabs, Schlick
//! reflections of an area light, and dataset generation.

mod generate;
mod optics;
mod scene;
mod trace;

use thiserror::Error;

use crate::io::IoError;

pub use generate::{
    camera_for, depth_range, generate_dataset, glass_surface_points, orbit_pose, orbit_poses, GenerateConfig,
    SplitCounts, DEPTH_SCALE, GLASS_POINT_SPACING,
};
pub use optics::{
    lateral_shift, schlick, schlick_f0, snell_refract, trace_through_slab, Line, Refraction, Slab, SlabCrossing,
};
pub use scene::{no_glass, showcase, slab_checker, AreaLight, Object, Orbit, Quad, SceneSpec, Texture};
pub use trace::{render_view, trace_scene, OracleView, TraceSample, BACKGROUND};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("unknown scene preset `{0}` (available: slab-checker, no-glass, showcase)")]
    UnknownPreset(String),
    #[error("texture: {0}")]
    Texture(String),
    #[error(transparent)]
    Io(#[from] IoError),
}

#[cfg(test)]
mod tests;
