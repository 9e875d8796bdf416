//! The full two-pass renderer: coarse stratified samples through the glass
//! and radiance fields, resampling from both weight sets, then a fine pass
//! on the merged samples.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::camera::{generate_rays, Camera, Ray, RayBounds};
use super::sampling::{hierarchical_resample, interval_lengths, merge_sorted, stratified_sample, SampleSource};
use super::volume::{accumulate_offsets, composite, refraction_weights, render_feature, render_view_independent};
use super::RenderError;
use crate::autodiff::{Graph, Real, Tensor, Var};
use crate::fields::Model;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub coarse_samples: usize,
    /// Extra fine-pass samples drawn from the coarse glass weights.
    pub glass_samples: usize,
    /// Extra fine-pass samples drawn from the coarse view-independent weights.
    pub vi_samples: usize,
    pub bounds: RayBounds,
    /// Run the glass network and bend rays by its offsets.
    pub use_glass: bool,
    /// Evaluate the view-dependent branch (`C = C_vi + α·C_vd`).
    pub view_dependent: bool,
    /// Apply offsets in the coarse pass too (the fine pass always does).
    pub offsets_in_coarse: bool,
    /// Add `(1 − Σw_vi)` of white to the view-independent colour.
    pub white_background: bool,
    /// Use the far sentinel as the last glass interval instead of the
    /// distance from the last sample to the far bound.
    pub glass_last_sentinel: bool,
    /// Rays per tape when rendering whole images.
    pub chunk: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            coarse_samples: 128,
            glass_samples: 32,
            vi_samples: 32,
            bounds: RayBounds {
                near: 2.0,
                far: 6.0,
                aabb: None,
            },
            use_glass: true,
            view_dependent: true,
            offsets_in_coarse: true,
            white_background: true,
            glass_last_sentinel: false,
            chunk: 1024,
        }
    }
}

impl RenderConfig {
    pub fn fine_extra(&self) -> usize {
        self.glass_samples + self.vi_samples
    }
}

/// Everything one pass produces for a batch of `R` rays with `N` samples.
#[derive(Clone, Debug)]
pub struct PassOutput {
    pub samples: usize,
    /// Sample distances, `R·N`, ray-major.
    pub t: Vec<f64>,
    /// Straight-ray sample positions, `R·N·3`.
    pub positions: Vec<f64>,
    /// `[R, 3]`, the composited colour.
    pub color: Var,
    /// `[R, 3]`
    pub color_vi: Var,
    /// `[R, 3]`, present when the view-dependent branch ran.
    pub color_vd: Option<Var>,
    /// `[R, 1]`
    pub alpha: Option<Var>,
    /// `[R]`, from the view-independent weights.
    pub depth: Var,
    /// `[R, N]`
    pub vi_weights: Var,
    /// `[R, N]` refraction weights, present when the glass network ran.
    pub glass_weights: Option<Var>,
    /// `[R, N, 3]` raw offsets `Δx`.
    pub offsets: Option<Var>,
    /// `[R, N, 3]` adjusted positions `x′`.
    pub adjusted: Var,
}

#[derive(Clone, Debug)]
pub struct BatchOutput {
    pub coarse: PassOutput,
    pub fine: Option<PassOutput>,
    /// Rays whose resampling weights were all zero.
    pub uniform_fallbacks: usize,
}

impl BatchOutput {
    /// The pass whose colour is the rendered result.
    pub fn final_pass(&self) -> &PassOutput {
        self.fine.as_ref().unwrap_or(&self.coarse)
    }

    pub fn passes(&self) -> impl Iterator<Item = &PassOutput> {
        std::iter::once(&self.coarse).chain(self.fine.as_ref())
    }
}

fn constant<T: Real>(g: &Graph<T>, shape: &[usize], values: &[f64]) -> Result<Var, RenderError> {
    Ok(g.constant(Tensor::from_f64(shape, values)?))
}

fn render_pass<T: Real>(
    g: &Graph<T>,
    model: &Model<T>,
    rays: &[Ray],
    t: Vec<f64>,
    samples: usize,
    fine: bool,
    config: &RenderConfig,
) -> Result<PassOutput, RenderError> {
    let r = rays.len();
    let n = samples;
    let mut positions = Vec::with_capacity(r * n * 3);
    let mut directions = Vec::with_capacity(r * n * 3);
    let mut deltas = Vec::with_capacity(r * n);
    let mut glass_deltas = Vec::with_capacity(r * n);
    for (ray, ts) in rays.iter().zip(t.chunks(n)) {
        for &ti in ts {
            let p = ray.at(ti);
            positions.extend([p.x, p.y, p.z]);
            directions.extend([ray.direction.x, ray.direction.y, ray.direction.z]);
        }
        let d = interval_lengths(ts);
        glass_deltas.extend_from_slice(&d[..n - 1]);
        glass_deltas.push(if config.glass_last_sentinel {
            d[n - 1]
        } else {
            (ray.far - ts[n - 1]).max(0.0)
        });
        deltas.extend(d);
    }
    let x = constant(g, &[r, n, 3], &positions)?;
    let dirs = constant(g, &[r * n, 3], &directions)?;
    let delta = constant(g, &[r, n], &deltas)?;
    let t_var = constant(g, &[r, n], &t)?;

    let (glass_weights, offsets, adjusted) = if config.use_glass {
        let x_flat = g.reshape(x, &[r * n, 3])?;
        let out = model.glass_field(g, x_flat, dirs)?;
        let sigma = g.reshape(out.density, &[r, n])?;
        let w = refraction_weights(g, sigma, constant(g, &[r, n], &glass_deltas)?)?;
        let offsets = g.reshape(out.offset, &[r, n, 3])?;
        let adjusted = if fine || config.offsets_in_coarse {
            accumulate_offsets(g, x, w, offsets)?
        } else {
            x
        };
        (Some(w), Some(offsets), adjusted)
    } else {
        (None, None, x)
    };

    let x_in = g.reshape(adjusted, &[r * n, 3])?;
    let field = model.nerf_field(g, x_in, dirs, fine, config.view_dependent)?;
    let sigma_vi = g.reshape(field.density_vi, &[r, n])?;
    let c_vi = g.reshape(field.color_vi, &[r, n, 3])?;
    let vi = render_view_independent(g, sigma_vi, c_vi, delta, t_var)?;
    let mut color_vi = vi.color;
    if config.white_background {
        let remaining = g.shift(g.neg(g.reshape(vi.opacity, &[r, 1])?), T::one());
        color_vi = g.add(color_vi, remaining)?;
    }

    let (color, color_vd, alpha) = match (field.density_vd, field.feature_vd) {
        (Some(sigma_vd), Some(f_vd)) => {
            let theta = model.config.feature_dim;
            let sigma_vd = g.reshape(sigma_vd, &[r, n])?;
            let f_vd = g.reshape(f_vd, &[r, n, theta])?;
            let features = render_feature(g, sigma_vd, f_vd, delta)?;
            let (c_vd, alpha) = model.decode_and_gate(g, features)?;
            (composite(g, color_vi, c_vd, alpha)?, Some(c_vd), Some(alpha))
        }
        _ => (color_vi, None, None),
    };

    Ok(PassOutput {
        samples: n,
        t,
        positions,
        color,
        color_vi,
        color_vd,
        alpha,
        depth: vi.depth,
        vi_weights: vi.weights,
        glass_weights,
        offsets,
        adjusted,
    })
}

/// Renders a batch of rays on `g`. Sample positions are jittered when `rng`
/// is given and deterministic (bin midpoints) otherwise. `fine_t` replaces
/// the resampled fine-pass distances (one ascending list per ray, all of
/// equal length); resampling is not differentiated, so fixing it is what
/// makes the whole batch a smooth function of the parameters.
pub fn render_batch<T: Real, R: Rng>(
    g: &Graph<T>,
    model: &Model<T>,
    rays: &[Ray],
    config: &RenderConfig,
    mut rng: Option<&mut R>,
    fine_t: Option<&[Vec<f64>]>,
) -> Result<BatchOutput, RenderError> {
    if rays.is_empty() {
        return Err(RenderError::InvalidInput("empty ray batch".into()));
    }
    let nc = config.coarse_samples.max(2);
    let mut coarse_t = Vec::with_capacity(rays.len() * nc);
    for ray in rays {
        coarse_t.extend(stratified_sample(ray, nc, rng.as_deref_mut()).t);
    }
    let coarse = render_pass(g, model, rays, coarse_t, nc, false, config)?;

    let mut uniform_fallbacks = 0;
    let fine_samples: Option<(Vec<f64>, usize)> = match fine_t {
        Some(lists) => {
            let n = lists.first().map_or(0, Vec::len);
            if lists.len() != rays.len() || n < 2 || lists.iter().any(|l| l.len() != n) {
                return Err(RenderError::InvalidInput(
                    "fine sample override needs one equal-length list (≥ 2) per ray".into(),
                ));
            }
            Some((lists.concat(), n))
        }
        None if config.fine_extra() == 0 => None,
        None => {
            let vi_w = g.value(coarse.vi_weights).to_f64_vec();
            let gl_w = coarse.glass_weights.map(|w| g.value(w).to_f64_vec());
            let (n_glass, n_vi) = match gl_w {
                Some(_) => (config.glass_samples, config.vi_samples),
                None => (0, config.fine_extra()),
            };
            let mut all = Vec::with_capacity(rays.len() * (nc + n_glass + n_vi));
            for (i, ray) in rays.iter().enumerate() {
                let ct = &coarse.t[i * nc..(i + 1) * nc];
                let row = i * nc..(i + 1) * nc;
                let mut sets: Vec<Vec<f64>> = vec![ct.to_vec()];
                if let Some(w) = &gl_w {
                    let s = hierarchical_resample(
                        ct,
                        &w[row.clone()],
                        ray.near,
                        ray.far,
                        n_glass,
                        SampleSource::Glass,
                        rng.as_deref_mut(),
                    );
                    uniform_fallbacks += usize::from(s.uniform_fallback);
                    sets.push(s.t);
                }
                let s = hierarchical_resample(
                    ct,
                    &vi_w[row],
                    ray.near,
                    ray.far,
                    n_vi,
                    SampleSource::ViewIndependent,
                    rng.as_deref_mut(),
                );
                uniform_fallbacks += usize::from(s.uniform_fallback);
                sets.push(s.t);
                let refs: Vec<&[f64]> = sets.iter().map(Vec::as_slice).collect();
                all.extend(merge_sorted(&refs));
            }
            Some((all, nc + n_glass + n_vi))
        }
    };
    let fine = match fine_samples {
        Some((t, n)) => Some(render_pass(g, model, rays, t, n, true, config)?),
        None => None,
    };
    Ok(BatchOutput {
        coarse,
        fine,
        uniform_fallbacks,
    })
}

/// Planar per-pixel outputs of a rendered view, row-major, RGB interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct RenderedImage {
    pub width: usize,
    pub height: usize,
    /// Composited colour (unclamped).
    pub color: Vec<f64>,
    pub color_vi: Vec<f64>,
    /// `α·C_vd`; zeros when the view-dependent branch is disabled.
    pub color_vd: Vec<f64>,
    pub alpha: Vec<f64>,
    pub depth: Vec<f64>,
}

/// Renders all pixels of `camera` deterministically in chunks of
/// `config.chunk` rays, calling `visit` on each chunk's tape.
pub fn render_image<T: Real, F>(
    model: &Model<T>,
    camera: &Camera,
    config: &RenderConfig,
    mut visit: F,
) -> Result<RenderedImage, RenderError>
where
    F: FnMut(&Graph<T>, &[Ray], &BatchOutput) -> Result<(), RenderError>,
{
    let (w, h) = (camera.width, camera.height);
    let pixels: Vec<(usize, usize)> = (0..h).flat_map(|j| (0..w).map(move |i| (i, j))).collect();
    let rays = generate_rays(camera, &pixels, &config.bounds)?;
    let mut out = RenderedImage {
        width: w,
        height: h,
        color: Vec::with_capacity(w * h * 3),
        color_vi: Vec::with_capacity(w * h * 3),
        color_vd: Vec::with_capacity(w * h * 3),
        alpha: Vec::with_capacity(w * h),
        depth: Vec::with_capacity(w * h),
    };
    for chunk in rays.chunks(config.chunk.max(1)) {
        let g = Graph::new();
        let batch = render_batch::<T, rand_chacha::ChaCha8Rng>(&g, model, chunk, config, None, None)?;
        let pass = batch.final_pass();
        out.color.extend(g.value(pass.color).to_f64_vec());
        out.color_vi.extend(g.value(pass.color_vi).to_f64_vec());
        match (pass.color_vd, pass.alpha) {
            (Some(c), Some(a)) => {
                let c = g.value(c).to_f64_vec();
                let a = g.value(a).to_f64_vec();
                for (k, &ak) in a.iter().enumerate() {
                    out.color_vd.extend(c[k * 3..k * 3 + 3].iter().map(|v| v * ak));
                }
                out.alpha.extend(a);
            }
            _ => {
                out.color_vd.extend(std::iter::repeat_n(0.0, chunk.len() * 3));
                out.alpha.extend(std::iter::repeat_n(0.0, chunk.len()));
            }
        }
        out.depth.extend(g.value(pass.depth).to_f64_vec());
        visit(&g, chunk, &batch)?;
    }
    Ok(out)
}
