//! Glass-surface extraction from a trained model and its distance to the
//! true glass faces.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::autodiff::Real;
use crate::fields::Model;
use crate::geometry::Vec3;
use crate::oracle::Slab;
use crate::render::{render_image, Camera, RenderConfig};

/// Default extraction threshold on `‖w·Δx‖` (cm).
pub const DEFAULT_THRESHOLD: f64 = 0.01;

/// Sample positions whose weighted offset exceeds the threshold.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GlassPointCloud {
    pub points: Vec<Vec3>,
    /// `‖w·Δx‖` of each stored point.
    pub magnitudes: Vec<f64>,
}

/// Statistics of `‖w_i·Δx_i‖` over every sample of every rendered ray.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OffsetStats {
    pub samples: usize,
    pub mean: f64,
    pub max: f64,
    /// Mean over rays of the total shift `‖Σ_i w_i·Δx_i‖`.
    pub mean_ray_shift: f64,
}

#[derive(Default)]
struct ViewScan {
    cloud: GlassPointCloud,
    sum: f64,
    ray_sum: f64,
    max: f64,
    samples: usize,
    rays: usize,
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Renders every camera and records, in the final pass, each straight-ray
/// sample position `x_i` with `‖w_i·Δx_i‖ > threshold` (strict).
pub fn extract_glass_surface<T: Real>(
    model: &Model<T>,
    cameras: &[Camera],
    config: &RenderConfig,
    threshold: f64,
) -> Result<(GlassPointCloud, OffsetStats), EvalError> {
    if !(threshold > 0.0) {
        return Err(EvalError::InvalidArgument(format!(
            "threshold {threshold} must be positive"
        )));
    }
    let per_view: Vec<Result<ViewScan, EvalError>> = cameras
        .par_iter()
        .map(|cam| {
            let mut scan = ViewScan::default();
            render_image(model, cam, config, |g, _, batch| {
                let pass = batch.final_pass();
                let (Some(w), Some(o)) = (pass.glass_weights, pass.offsets) else {
                    return Ok(());
                };
                let w = g.value(w).to_f64_vec();
                let o = g.value(o).to_f64_vec();
                let n = pass.samples;
                for (r, wr) in w.chunks(n).enumerate() {
                    let mut shift = [0.0; 3];
                    for (i, &wi) in wr.iter().enumerate() {
                        let k = (r * n + i) * 3;
                        let s = [wi * o[k], wi * o[k + 1], wi * o[k + 2]];
                        shift.iter_mut().zip(s).for_each(|(a, b)| *a += b);
                        let m = norm(s);
                        scan.sum += m;
                        scan.max = scan.max.max(m);
                        scan.samples += 1;
                        if m > threshold {
                            let p = &pass.positions[k..k + 3];
                            scan.cloud.points.push(Vec3::new(p[0], p[1], p[2]));
                            scan.cloud.magnitudes.push(m);
                        }
                    }
                    scan.ray_sum += norm(shift);
                    scan.rays += 1;
                }
                Ok(())
            })?;
            Ok(scan)
        })
        .collect();
    // Views are merged in input order so the cloud is independent of
    // scheduling.
    let mut total = ViewScan::default();
    for scan in per_view {
        let scan = scan?;
        total.cloud.points.extend(scan.cloud.points);
        total.cloud.magnitudes.extend(scan.cloud.magnitudes);
        total.sum += scan.sum;
        total.ray_sum += scan.ray_sum;
        total.max = total.max.max(scan.max);
        total.samples += scan.samples;
        total.rays += scan.rays;
    }
    let mut stats = OffsetStats {
        samples: total.samples,
        max: total.max,
        ..OffsetStats::default()
    };
    if total.samples > 0 {
        stats.mean = total.sum / total.samples as f64;
        stats.mean_ray_shift = total.ray_sum / total.rays as f64;
    }
    let cloud = total.cloud;
    Ok((cloud, stats))
}

/// Distance from `p` to the nearest of the slab's two face rectangles.
pub fn distance_to_slab(p: Vec3, slab: &Slab) -> f64 {
    let (u, v) = slab.tangents();
    slab.faces()
        .iter()
        .map(|&(c, n)| {
            let r = p - c;
            let du = (r.dot(u).abs() - slab.half_u).max(0.0);
            let dv = (r.dot(v).abs() - slab.half_v).max(0.0);
            let dn = r.dot(n);
            (du * du + dv * dv + dn * dn).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceError {
    pub points: usize,
    pub mean: f64,
    pub median: f64,
    pub rms: f64,
}

/// Distance of each point to the nearest true glass face (clipped to the
/// face rectangles), summarized.
pub fn surface_error(points: &[Vec3], slabs: &[Slab]) -> Result<SurfaceError, EvalError> {
    if points.is_empty() {
        return Err(EvalError::EmptyCloud);
    }
    if slabs.is_empty() {
        return Err(EvalError::InvalidArgument("no glass faces to compare against".into()));
    }
    let mut d: Vec<f64> = points
        .iter()
        .map(|&p| {
            slabs
                .iter()
                .map(|s| distance_to_slab(p, s))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let rms = (d.iter().map(|x| x * x).sum::<f64>() / n).sqrt();
    d.sort_by(f64::total_cmp);
    let median = if d.len() % 2 == 1 {
        d[d.len() / 2]
    } else {
        0.5 * (d[d.len() / 2 - 1] + d[d.len() / 2])
    };
    Ok(SurfaceError {
        points: d.len(),
        mean,
        median,
        rms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{EncodingConfig, FieldConfig};
    use crate::geometry::look_at;
    use crate::render::RayBounds;

    fn slab() -> Slab {
        crate::oracle::slab_checker().slabs[0].clone()
    }

    #[test]
    fn surface_error_examples() {
        let s = slab();
        let on = vec![Vec3::new(0.0, 0.0, 2.0), Vec3::new(1.0, -2.0, 1.0)];
        assert_eq!(surface_error(&on, std::slice::from_ref(&s)).unwrap().mean, 0.0);
        let off = vec![Vec3::new(0.5, 0.5, 2.3)];
        assert!((surface_error(&off, std::slice::from_ref(&s)).unwrap().mean - 0.3).abs() < 1e-12);
        assert!(matches!(
            surface_error(&[], std::slice::from_ref(&s)),
            Err(EvalError::EmptyCloud)
        ));
        // beyond the rectangle the distance is to its edge
        let outside = vec![Vec3::new(8.0, 0.0, 2.0)];
        assert!((surface_error(&outside, &[s]).unwrap().mean - 3.0).abs() < 1e-12);
    }

    #[test]
    fn surface_error_is_translation_equivariant() {
        let s = slab();
        let pts = vec![
            Vec3::new(0.3, 0.2, 2.4),
            Vec3::new(-4.0, 6.0, 0.5),
            Vec3::new(1.0, 1.0, 1.5),
        ];
        let base = surface_error(&pts, std::slice::from_ref(&s)).unwrap();
        let shift = Vec3::new(12.5, -3.25, 7.0);
        let moved: Vec<Vec3> = pts.iter().map(|&p| p + shift).collect();
        let mut s2 = s;
        s2.point += shift;
        let other = surface_error(&moved, &[s2]).unwrap();
        assert!((base.mean - other.mean).abs() < 1e-12);
        assert!(base.median <= base.rms + 1e-12 || base.points < 3);
    }

    #[test]
    fn untrained_zero_offset_model_extracts_nothing() {
        let model = Model::<f64>::new(FieldConfig {
            width: 8,
            glass_depth: 2,
            nerf_depth: 2,
            skip_layer: 1,
            feature_dim: 4,
            position_encoding: EncodingConfig::new(2, true),
            direction_encoding: EncodingConfig::new(1, true),
            ..FieldConfig::default()
        });
        let cam = Camera::from_fov(
            4,
            4,
            0.6,
            look_at(Vec3::new(0.0, 0.0, 4.0), Vec3::ZERO, Vec3::new(0.0, 1.0, 0.0)),
        );
        let cfg = RenderConfig {
            coarse_samples: 8,
            glass_samples: 2,
            vi_samples: 2,
            bounds: RayBounds {
                near: 1.0,
                far: 7.0,
                aabb: None,
            },
            ..RenderConfig::default()
        };
        let (cloud, stats) = extract_glass_surface(&model, &[cam], &cfg, DEFAULT_THRESHOLD).unwrap();
        assert!(cloud.points.is_empty());
        assert_eq!(stats.samples, 16 * 12);
        assert_eq!(stats.mean, 0.0);
        assert!(extract_glass_surface(&model, &[], &cfg, 0.0).is_err());
    }
}
