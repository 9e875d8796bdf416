//! Evaluation: image metrics, highlight attribution, glass-surface
//! extraction and its distance to ground truth.

mod glass;
mod metrics;
mod report;

use thiserror::Error;

use crate::dataset::DatasetError;
use crate::io::IoError;
use crate::render::RenderError;

pub use glass::{
    distance_to_slab, extract_glass_surface, surface_error, GlassPointCloud, OffsetStats, SurfaceError,
    DEFAULT_THRESHOLD,
};
pub use metrics::{luma, mse, psnr, quantize, ssim, ssim_gray, SSIM_SIGMA, SSIM_WINDOW};
pub use report::{
    evaluate, highlight_metrics, write_grid, EvalOptions, HighlightMetrics, MetricReport, ViewMetrics,
    DEFAULT_HIGHLIGHT_THRESHOLD,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("buffer sizes differ or are empty: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },
    #[error("image {width}x{height} is smaller than the SSIM window")]
    TooSmall { width: usize, height: usize },
    #[error("extracted glass point cloud is empty")]
    EmptyCloud,
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Io(#[from] IoError),
}
