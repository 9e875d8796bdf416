//! Whole-scene tracing: refracted primary paths through any number of
//! slabs plus one Fresnel-weighted specular bounce off the first glass face.

use super::optics::{schlick, schlick_f0, trace_through_slab, Line};
use super::scene::{AreaLight, Object, Quad, SceneSpec};
use crate::geometry::Vec3;
use crate::render::Camera;

const EPS: f64 = 1e-7;

/// Radiance returned by a path that leaves the scene.
pub const BACKGROUND: Vec3 = Vec3::new(1.0, 1.0, 1.0);

/// One traced pixel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceSample {
    /// Refracted-path radiance plus reflection, clamped to `[0, 1]`.
    pub color: Vec3,
    /// Path length to the first opaque surface; `None` when the path escapes.
    pub depth: Option<f64>,
    /// The reflection term alone, clamped to `[0, 1]`.
    pub reflection: Vec3,
    /// Slab traversals beyond the limit were ignored.
    pub truncated: bool,
    /// The primary path entered at least one slab.
    pub through_glass: bool,
}

fn hit_quad(q: &Quad, origin: Vec3, dir: Vec3) -> Option<(f64, Vec3)> {
    let a = q.axis;
    if dir[a].abs() < 1e-15 {
        return None;
    }
    let t = (q.offset - origin[a]) / dir[a];
    if t <= EPS {
        return None;
    }
    let p = origin + dir * t;
    let (b, c) = q.other_axes();
    let inside = p[b] >= q.min[0] && p[b] <= q.max[0] && p[c] >= q.min[1] && p[c] <= q.max[1];
    inside.then(|| (t, q.texture.sample(p[b], p[c], 0.0)))
}

fn hit_object(o: &Object, origin: Vec3, dir: Vec3) -> Option<(f64, Vec3)> {
    match o {
        Object::Box { bounds, texture } => {
            let (t0, t1) = bounds.intersect(origin, dir)?;
            let t = if t0 > EPS {
                t0
            } else if t1 > EPS {
                t1
            } else {
                return None;
            };
            let p = origin + dir * t;
            // face axis: the coordinate closest to a box boundary
            let mut axis = 0;
            let mut best = f64::INFINITY;
            for k in 0..3 {
                let d = (p[k] - bounds.min[k]).abs().min((p[k] - bounds.max[k]).abs());
                if d < best {
                    best = d;
                    axis = k;
                }
            }
            let (b, c) = match axis {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            Some((t, texture.sample(p[b], p[c], 0.0)))
        }
        Object::Sphere {
            center,
            radius,
            texture,
        } => {
            let oc = origin - *center;
            let b = oc.dot(dir);
            let c = oc.dot(oc) - radius * radius;
            let disc = b * b - c;
            if disc < 0.0 {
                return None;
            }
            let s = disc.sqrt();
            let t = if -b - s > EPS {
                -b - s
            } else if -b + s > EPS {
                -b + s
            } else {
                return None;
            };
            let p = origin + dir * t;
            let r = p - *center;
            Some((t, texture.sample(r.y + radius, r.z.atan2(r.x) * radius, 0.0)))
        }
    }
}

/// Nearest opaque hit: `(distance, albedo)`.
fn hit_opaque(scene: &SceneSpec, origin: Vec3, dir: Vec3) -> Option<(f64, Vec3)> {
    let walls = scene.walls.iter().filter_map(|q| hit_quad(q, origin, dir));
    let objects = scene.objects.iter().filter_map(|o| hit_object(o, origin, dir));
    walls.chain(objects).min_by(|a, b| a.0.total_cmp(&b.0))
}

fn hit_light(light: &AreaLight, origin: Vec3, dir: Vec3) -> Option<(f64, f64)> {
    let denom = dir.dot(light.normal);
    if denom >= -1e-12 {
        return None;
    }
    let t = (light.center - origin).dot(light.normal) / denom;
    if t <= EPS {
        return None;
    }
    let p = origin + dir * t - light.center;
    let helper = if light.normal.y.abs() < 0.9 {
        Vec3::new(0.0, 1.0, 0.0)
    } else {
        Vec3::new(1.0, 0.0, 0.0)
    };
    let u = helper.cross(light.normal).normalized();
    let v = light.normal.cross(u);
    (p.dot(u).abs() <= light.half_size && p.dot(v).abs() <= light.half_size).then_some((t, light.intensity))
}

/// Radiance seen along a reflected ray: the light if it is the nearest
/// thing hit, otherwise the albedo of the nearest opaque surface.
fn reflected_radiance(scene: &SceneSpec, origin: Vec3, dir: Vec3) -> Vec3 {
    let surface = hit_opaque(scene, origin, dir);
    let light = scene.light.as_ref().and_then(|l| hit_light(l, origin, dir));
    match (surface, light) {
        (Some((ts, _)), Some((tl, e))) if tl < ts => Vec3::splat(e),
        (None, Some((_, e))) => Vec3::splat(e),
        (Some((_, albedo)), _) => albedo,
        (None, None) => Vec3::ZERO,
    }
}

/// Nearest slab face hit: `(distance, slab index, outward face normal)`.
fn hit_glass(scene: &SceneSpec, origin: Vec3, dir: Vec3) -> Option<(f64, usize, Vec3)> {
    scene
        .slabs
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.hit(origin, dir, EPS).map(|(t, _, n)| (t, i, n)))
        .min_by(|a, b| a.0.total_cmp(&b.0))
}

/// Traces one primary ray (unit direction) through the scene.
pub fn trace_scene(scene: &SceneSpec, origin: Vec3, direction: Vec3) -> TraceSample {
    let mut line = Line { origin, direction };
    let mut travelled = 0.0;
    let mut reflection = Vec3::ZERO;
    let mut reflected_once = false;
    let mut truncated = false;
    let mut through_glass = false;
    let mut traversals = 0;
    loop {
        let opaque = hit_opaque(scene, line.origin, line.direction);
        let glass = hit_glass(scene, line.origin, line.direction);
        let glass_first = match (glass, opaque) {
            (Some(g), Some(o)) => g.0 < o.0,
            (Some(_), None) => true,
            _ => false,
        };
        if glass_first && traversals >= scene.max_traversals {
            truncated = true;
        }
        if glass_first && !truncated {
            let (t, i, n_out) = glass.expect("glass hit");
            let slab = &scene.slabs[i];
            let cos_i = -line.direction.dot(n_out);
            if !reflected_once && scene.reflectivity > 0.0 && cos_i > 0.0 {
                let f = scene.reflectivity * schlick(cos_i, schlick_f0(1.0, slab.index));
                let hit = line.origin + line.direction * t;
                let r = line.direction.reflect(n_out);
                reflection += reflected_radiance(scene, hit, r) * f;
                reflected_once = true;
            }
            let crossing = trace_through_slab(&line, slab);
            traversals += 1;
            if crossing.entered {
                through_glass = true;
                travelled += crossing.path_length;
                line = crossing.exit;
            } else {
                // grazing contact: step past it unchanged
                let step = t + 1e-6;
                travelled += step;
                line.origin += line.direction * step;
            }
            continue;
        }
        let (base, depth) = match opaque {
            Some((t, albedo)) => (albedo, Some(travelled + t)),
            None => (BACKGROUND, None),
        };
        return TraceSample {
            color: (base + reflection).clamp01(),
            depth,
            reflection: reflection.clamp01(),
            truncated,
            through_glass,
        };
    }
}

/// Ground-truth buffers for one view, row-major with RGB interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleView {
    pub width: usize,
    pub height: usize,
    pub color: Vec<f64>,
    /// Path length to the first opaque surface, 0 where the path escapes.
    pub depth: Vec<f64>,
    pub reflection: Vec<f64>,
    /// Pixels whose path hit the traversal limit.
    pub truncated: usize,
}

/// Traces every pixel centre of `camera`.
pub fn render_view(scene: &SceneSpec, camera: &Camera) -> OracleView {
    let (w, h) = (camera.width, camera.height);
    let mut view = OracleView {
        width: w,
        height: h,
        color: Vec::with_capacity(w * h * 3),
        depth: Vec::with_capacity(w * h),
        reflection: Vec::with_capacity(w * h * 3),
        truncated: 0,
    };
    let origin = camera.origin();
    for j in 0..h {
        for i in 0..w {
            let dir = camera.direction_at(i as f64 + 0.5, j as f64 + 0.5);
            let s = trace_scene(scene, origin, dir);
            view.color.extend(s.color.to_array());
            view.reflection.extend(s.reflection.to_array());
            view.depth.push(s.depth.unwrap_or(0.0));
            view.truncated += usize::from(s.truncated);
        }
    }
    view
}
