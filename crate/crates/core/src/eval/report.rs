//! Per-view evaluation of a trained model against a dataset split.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{luma, psnr, quantize, ssim};
use super::EvalError;
use crate::autodiff::Real;
use crate::dataset::Dataset;
use crate::fields::Model;
use crate::io::{read_rgb_png, write_rgb_png};
use crate::render::{render_image, RenderConfig, RenderedImage};

/// Luma above which a reflection pixel counts as part of a highlight.
pub const DEFAULT_HIGHLIGHT_THRESHOLD: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Compare 8-bit quantized renders (the default) instead of raw floats.
    pub quantize: bool,
    pub highlight_threshold: f64,
    /// Directory for `view_XXX.png` comparison grids.
    pub grid_dir: Option<PathBuf>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            quantize: true,
            highlight_threshold: DEFAULT_HIGHLIGHT_THRESHOLD,
            grid_dir: None,
        }
    }
}

/// How well the view-dependent image `α·C_vd` reproduces the true reflection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HighlightMetrics {
    /// `Σ min(pred, gt) / Σ gt` of luma over the true highlight mask.
    pub energy_fraction: f64,
    /// IoU of the thresholded predicted and true highlight masks.
    pub mask_iou: f64,
    pub gt_pixels: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewMetrics {
    pub index: usize,
    pub psnr: f64,
    pub ssim: f64,
    pub highlight: Option<HighlightMetrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub views: Vec<ViewMetrics>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    /// Pixel-weighted over views that contain a highlight.
    pub highlight: Option<HighlightMetrics>,
    pub quantized: bool,
}

/// Highlight attribution of a predicted view-dependent image against the
/// true reflection image (both interleaved RGB). `None` when the true image
/// has no highlight pixel.
pub fn highlight_metrics(
    pred_vd: &[f64],
    gt_reflection: &[f64],
    threshold: f64,
) -> Result<Option<HighlightMetrics>, EvalError> {
    let sums = highlight_sums(pred_vd, gt_reflection, threshold)?;
    Ok(sums.finish())
}

#[derive(Clone, Copy, Default)]
struct HighlightSums {
    captured: f64,
    total: f64,
    inter: usize,
    union: usize,
    gt_pixels: usize,
}

impl HighlightSums {
    fn add(&mut self, o: HighlightSums) {
        self.captured += o.captured;
        self.total += o.total;
        self.inter += o.inter;
        self.union += o.union;
        self.gt_pixels += o.gt_pixels;
    }

    fn finish(self) -> Option<HighlightMetrics> {
        (self.gt_pixels > 0).then(|| HighlightMetrics {
            energy_fraction: self.captured / self.total,
            mask_iou: self.inter as f64 / self.union as f64,
            gt_pixels: self.gt_pixels,
        })
    }
}

fn highlight_sums(pred: &[f64], gt: &[f64], threshold: f64) -> Result<HighlightSums, EvalError> {
    if pred.len() != gt.len() || !pred.len().is_multiple_of(3) {
        return Err(EvalError::SizeMismatch {
            left: pred.len(),
            right: gt.len(),
        });
    }
    let (lp, lg) = (luma(pred), luma(gt));
    let mut s = HighlightSums::default();
    for (&p, &t) in lp.iter().zip(&lg) {
        let (in_p, in_t) = (p > threshold, t > threshold);
        if in_t {
            s.gt_pixels += 1;
            s.total += t;
            s.captured += p.clamp(0.0, t);
        }
        s.inter += usize::from(in_p && in_t);
        s.union += usize::from(in_p || in_t);
    }
    Ok(s)
}

/// Writes `gt | render | α·C_vd | C_vi | depth` side by side.
pub fn write_grid(path: &Path, gt: &[f64], img: &RenderedImage) -> Result<(), EvalError> {
    let (w, h) = (img.width, img.height);
    let (dmin, dmax) = img
        .depth
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &d| (a.min(d), b.max(d)));
    let span = (dmax - dmin).max(1e-12);
    let panels: [&dyn Fn(usize) -> [f64; 3]; 5] = [
        &|k| [gt[3 * k], gt[3 * k + 1], gt[3 * k + 2]],
        &|k| [img.color[3 * k], img.color[3 * k + 1], img.color[3 * k + 2]],
        &|k| [img.color_vd[3 * k], img.color_vd[3 * k + 1], img.color_vd[3 * k + 2]],
        &|k| [img.color_vi[3 * k], img.color_vi[3 * k + 1], img.color_vi[3 * k + 2]],
        &|k| [1.0 - (img.depth[k] - dmin) / span; 3],
    ];
    let mut out = Vec::with_capacity(w * h * 15);
    for y in 0..h {
        for panel in &panels {
            for x in 0..w {
                out.extend(panel(y * w + x));
            }
        }
    }
    write_rgb_png(path, w * panels.len(), h, &out)?;
    Ok(())
}

/// Renders every view of `dataset` and scores it. Highlight metrics are
/// computed for frames whose manifest entry names a reflection image.
pub fn evaluate<T: Real>(
    model: &Model<T>,
    dataset: &Dataset,
    config: &RenderConfig,
    options: &EvalOptions,
) -> Result<MetricReport, EvalError> {
    if let Some(dir) = &options.grid_dir {
        std::fs::create_dir_all(dir).map_err(|e| crate::io::IoError::file(dir, e))?;
    }
    let scored: Vec<Result<(ViewMetrics, Option<HighlightSums>), EvalError>> = dataset
        .views
        .par_iter()
        .map(|view| {
            let img = render_image(model, &view.camera, config, |_, _, _| Ok(()))?;
            let mut pred: Vec<f64> = img.color.iter().map(|v| v.clamp(0.0, 1.0)).collect();
            if options.quantize {
                pred = quantize(&pred);
            }
            let (w, h) = (img.width, img.height);
            let p = psnr(&pred, &view.rgb, 1.0)?;
            let s = ssim(&pred, &view.rgb, w, h)?;
            let frame = &dataset.manifest.frames[view.index];
            let sums = match &frame.reflection_path {
                Some(rel) => {
                    let (_, _, gt) = read_rgb_png(&dataset.resolve(rel))?;
                    Some(highlight_sums(&img.color_vd, &gt, options.highlight_threshold)?)
                }
                None => None,
            };
            if let Some(dir) = &options.grid_dir {
                write_grid(&dir.join(format!("view_{:03}.png", view.index)), &view.rgb, &img)?;
            }
            let metrics = ViewMetrics {
                index: view.index,
                psnr: p,
                ssim: s,
                highlight: sums.and_then(HighlightSums::finish),
            };
            Ok((metrics, sums))
        })
        .collect();
    let mut views = Vec::with_capacity(scored.len());
    let mut sums = HighlightSums::default();
    let mut any_highlight = false;
    for r in scored {
        let (m, hs) = r?;
        if let Some(hs) = hs {
            any_highlight = true;
            sums.add(hs);
        }
        views.push(m);
    }
    let n = views.len() as f64;
    Ok(MetricReport {
        mean_psnr: views.iter().map(|v| v.psnr).sum::<f64>() / n,
        mean_ssim: views.iter().map(|v| v.ssim).sum::<f64>() / n,
        highlight: if any_highlight { sums.finish() } else { None },
        views,
        quantized: options.quantize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn highlight_metrics_examples() {
        // 4 pixels: true highlight on the first two.
        let gt = [0.5, 0.5, 0.5, 0.3, 0.3, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let exact = highlight_metrics(&gt, &gt, 0.1).unwrap().unwrap();
        assert!((exact.energy_fraction - 1.0).abs() < 1e-12);
        assert_eq!(exact.mask_iou, 1.0);
        assert_eq!(exact.gt_pixels, 2);

        // Overshoot is not rewarded; a spurious pixel lowers the IoU.
        let pred = [0.9, 0.9, 0.9, 0.0, 0.0, 0.0, 0.5, 0.5, 0.5, 0.0, 0.0, 0.0];
        let m = highlight_metrics(&pred, &gt, 0.1).unwrap().unwrap();
        assert!((m.energy_fraction - 0.5 / 0.8).abs() < 1e-9);
        assert!((m.mask_iou - 1.0 / 3.0).abs() < 1e-12);

        assert!(highlight_metrics(&[0.0; 6], &[0.0; 6], 0.1).unwrap().is_none());
        assert!(highlight_metrics(&[0.0; 6], &[0.0; 3], 0.1).is_err());
    }
}
