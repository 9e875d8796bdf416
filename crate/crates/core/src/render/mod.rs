//! Ray generation, sampling, refraction-offset accumulation, two-branch
//! volume integration and compositing.

mod camera;
mod pipeline;
mod sampling;
mod volume;

use thiserror::Error;

use crate::autodiff::AutodiffError;
use crate::fields::FieldError;

pub use camera::{generate_rays, Camera, Ray, RayBounds};
pub use pipeline::{render_batch, render_image, BatchOutput, PassOutput, RenderConfig, RenderedImage};
pub use sampling::{
    hierarchical_resample, interval_lengths, merge_sorted, stratified_sample, Resampled, SampleBatch, SampleSource,
    FAR_SENTINEL,
};
pub use volume::{
    accumulate_offsets, composite, integrate, refraction_weights, render_feature, render_view_independent,
    volume_weights, ViewIndependent,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("pixel ({x}, {y}) outside {width}x{height} image")]
    PixelOutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("negative {field} density {value}")]
    NegativeDensity { field: &'static str, value: f64 },
    #[error("invalid render input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}
