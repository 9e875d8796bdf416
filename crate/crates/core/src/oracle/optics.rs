//! Snell refraction, Schlick reflectance and exact tracing through a
//! parallel-faced slab.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;

/// Result of refracting at an interface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Refraction {
    Transmitted(Vec3),
    TotalInternalReflection,
}

/// Refracts unit direction `d` at a surface with unit normal `n` facing the
/// incident side (`d·n ≤ 0`). `eta` is `n_incident / n_transmitted`.
pub fn snell_refract(d: Vec3, n: Vec3, eta: f64) -> Refraction {
    let cos_i = -d.dot(n);
    let sin2_t = eta * eta * (1.0 - cos_i * cos_i).max(0.0);
    if sin2_t > 1.0 {
        return Refraction::TotalInternalReflection;
    }
    let cos_t = (1.0 - sin2_t).sqrt();
    Refraction::Transmitted((d * eta + n * (eta * cos_i - cos_t)).normalized())
}

/// Normal-incidence reflectance `((n₁ − n₂)/(n₁ + n₂))²`.
pub fn schlick_f0(n1: f64, n2: f64) -> f64 {
    ((n1 - n2) / (n1 + n2)).powi(2)
}

/// Schlick's approximation to the Fresnel reflectance at incidence cosine
/// `cos_i`, always within `[0, 1]`.
pub fn schlick(cos_i: f64, f0: f64) -> f64 {
    let c = cos_i.clamp(0.0, 1.0);
    (f0 + (1.0 - f0) * (1.0 - c).powi(5)).clamp(0.0, 1.0)
}

/// Closed-form lateral displacement of a ray crossing a slab of thickness
/// `t` at incidence angle `theta_i` (radians) with relative index `n`.
pub fn lateral_shift(theta_i: f64, n: f64, t: f64) -> f64 {
    let theta_t = (theta_i.sin() / n).asin();
    t * (theta_i - theta_t).sin() / theta_t.cos()
}

/// A flat glass plate: the region between the plane through `point` with
/// outward unit `normal` and the parallel plane `thickness` behind it,
/// limited to a `2·half_u × 2·half_v` rectangle around `point`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slab {
    pub point: Vec3,
    pub normal: Vec3,
    pub thickness: f64,
    pub index: f64,
    pub half_u: f64,
    pub half_v: f64,
}

impl Slab {
    /// In-plane unit axes `(u, v)` with `u × v = normal`.
    pub fn tangents(&self) -> (Vec3, Vec3) {
        let n = self.normal;
        let helper = if n.y.abs() < 0.9 {
            Vec3::new(0.0, 1.0, 0.0)
        } else {
            Vec3::new(1.0, 0.0, 0.0)
        };
        let u = helper.cross(n).normalized();
        (u, n.cross(u))
    }

    /// Centre of the inner face.
    pub fn inner_point(&self) -> Vec3 {
        self.point - self.normal * self.thickness
    }

    /// Both boundary faces as `(point, outward normal of that face)`.
    pub fn faces(&self) -> [(Vec3, Vec3); 2] {
        [(self.point, self.normal), (self.inner_point(), -self.normal)]
    }

    /// Whether `p` (assumed on one of the face planes) lies inside the
    /// rectangle.
    pub fn within(&self, p: Vec3) -> bool {
        let (u, v) = self.tangents();
        let r = p - self.point;
        r.dot(u).abs() <= self.half_u && r.dot(v).abs() <= self.half_v
    }

    /// Nearest face hit with `t > eps`: `(t, face index, outward normal)`.
    pub fn hit(&self, origin: Vec3, dir: Vec3, eps: f64) -> Option<(f64, usize, Vec3)> {
        let mut best: Option<(f64, usize, Vec3)> = None;
        for (k, (p, n)) in self.faces().into_iter().enumerate() {
            let denom = dir.dot(n);
            if denom.abs() < 1e-12 {
                continue;
            }
            let t = (p - origin).dot(n) / denom;
            if t > eps && best.is_none_or(|b| t < b.0) && self.within(origin + dir * t) {
                best = Some((t, k, n));
            }
        }
        best
    }
}

/// Straight line in the oracle's world (no sampling bounds).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Line {
    pub origin: Vec3,
    pub direction: Vec3,
}

/// Outcome of pushing a line through one slab.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlabCrossing {
    pub exit: Line,
    /// Whether the line actually entered the slab.
    pub entered: bool,
    /// Entry point on the first face (equal to the origin when not entered).
    pub entry: Vec3,
    /// Distance travelled from the origin to the exit point.
    pub path_length: f64,
    /// Incidence cosine at the entry face.
    pub cos_incidence: f64,
    /// Outward normal of the entry face.
    pub entry_normal: Vec3,
    /// Internal reflections performed (only when the faces are not
    /// parallel to each other in the line's frame, which cannot happen for
    /// a slab entered from air, but is handled for completeness).
    pub internal_reflections: usize,
}

impl SlabCrossing {
    /// Perpendicular distance between the incoming and outgoing lines.
    pub fn lateral_shift(&self, incoming: &Line) -> f64 {
        (self.exit.origin - incoming.origin).cross(incoming.direction).length()
    }
}

const GRAZING_COS: f64 = 1e-9;

/// Refracts `line` into `slab`, through it, and out of the opposite face.
/// Lines that miss the slab or graze it pass through unchanged.
pub fn trace_through_slab(line: &Line, slab: &Slab) -> SlabCrossing {
    let unchanged = SlabCrossing {
        exit: *line,
        entered: false,
        entry: line.origin,
        path_length: 0.0,
        cos_incidence: 1.0,
        entry_normal: slab.normal,
        internal_reflections: 0,
    };
    let Some((t0, face, n_out)) = slab.hit(line.origin, line.direction, 1e-9) else {
        return unchanged;
    };
    let cos_i = -line.direction.dot(n_out);
    if cos_i < GRAZING_COS {
        return unchanged;
    }
    let entry = line.origin + line.direction * t0;
    let Refraction::Transmitted(inside) = snell_refract(line.direction, n_out, 1.0 / slab.index) else {
        return unchanged;
    };

    // Bounce between the two planes until transmission out of either face.
    let faces = slab.faces();
    let mut pos = entry;
    let mut dir = inside;
    let mut length = t0;
    let mut target = 1 - face;
    let mut reflections = 0;
    for _ in 0..16 {
        let (p, n) = faces[target];
        let denom = dir.dot(n);
        if denom <= 0.0 {
            break;
        }
        let s = (p - pos).dot(n) / denom;
        pos += dir * s;
        length += s;
        // the face normal seen from inside points against `n`
        match snell_refract(dir, -n, slab.index) {
            Refraction::Transmitted(out) => {
                return SlabCrossing {
                    exit: Line {
                        origin: pos,
                        direction: out,
                    },
                    entered: true,
                    entry,
                    path_length: length,
                    cos_incidence: cos_i,
                    entry_normal: n_out,
                    internal_reflections: reflections,
                };
            }
            Refraction::TotalInternalReflection => {
                dir = dir.reflect(-n);
                target = 1 - target;
                reflections += 1;
            }
        }
    }
    unchanged
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slab(t: f64) -> Slab {
        Slab {
            point: Vec3::new(0.0, 0.0, 0.0),
            normal: Vec3::new(0.0, 0.0, 1.0),
            thickness: t,
            index: 1.45,
            half_u: 100.0,
            half_v: 100.0,
        }
    }

    fn incoming(theta: f64) -> Line {
        let dir = Vec3::new(theta.sin(), 0.0, -theta.cos());
        Line {
            origin: Vec3::new(0.0, 0.0, 5.0) - dir * (5.0 / theta.cos()),
            direction: dir,
        }
    }

    #[test]
    fn normal_incidence_is_unchanged() {
        let n = Vec3::new(0.0, 0.0, 1.0);
        for eta in [0.5, 1.0 / 1.45, 1.45] {
            let Refraction::Transmitted(d) = snell_refract(-n, n, eta) else {
                panic!("tir at normal incidence")
            };
            assert!((d - (-n)).length() < 1e-15);
        }
    }

    #[test]
    fn snell_45_degrees_into_glass() {
        let n = Vec3::new(0.0, 0.0, 1.0);
        let d = Vec3::new(1.0, 0.0, -1.0).normalized();
        let Refraction::Transmitted(t) = snell_refract(d, n, 1.0 / 1.45) else {
            panic!()
        };
        let angle = t.dot(-n).acos().to_degrees();
        let expect = ((45f64.to_radians().sin()) / 1.45).asin().to_degrees();
        assert!((angle - expect).abs() < 1e-10);
        assert!((angle - 29.19).abs() < 0.01);
    }

    #[test]
    fn total_internal_reflection_beyond_critical_angle() {
        let critical = (1.0 / 1.45f64).asin().to_degrees();
        assert!((critical - 43.6).abs() < 0.05);
        let n = Vec3::new(0.0, 0.0, 1.0);
        let th = 60f64.to_radians();
        let d = Vec3::new(th.sin(), 0.0, -th.cos());
        assert_eq!(snell_refract(d, n, 1.45), Refraction::TotalInternalReflection);
    }

    #[test]
    fn slab_shift_examples() {
        let th = 45f64.to_radians();
        let line = incoming(th);
        let c = trace_through_slab(&line, &slab(1.0));
        assert!(c.entered);
        let d = c.lateral_shift(&line);
        assert!((d - lateral_shift(th, 1.45, 1.0)).abs() < 1e-12);
        assert!((d - 0.312).abs() < 5e-4, "shift {d}");
        assert!(c.exit.direction.dot(line.direction) >= 1.0 - 1e-12);

        let c2 = trace_through_slab(&line, &slab(2.0));
        assert!((c2.lateral_shift(&line) - 2.0 * d).abs() < 1e-12);

        let straight = incoming(0.0);
        let c0 = trace_through_slab(&straight, &slab(1.0));
        assert!(c0.lateral_shift(&straight) < 1e-15);
    }

    #[test]
    fn missing_or_grazing_lines_pass_through() {
        let mut s = slab(1.0);
        s.half_u = 0.1;
        s.half_v = 0.1;
        let line = Line {
            origin: Vec3::new(3.0, 0.0, 5.0),
            direction: Vec3::new(0.0, 0.0, -1.0),
        };
        let c = trace_through_slab(&line, &s);
        assert!(!c.entered && c.exit == line);
        let graze = Line {
            origin: Vec3::new(-5.0, 0.0, 0.5),
            direction: Vec3::new(1.0, 0.0, 0.0),
        };
        assert!(!trace_through_slab(&graze, &slab(1.0)).entered);
    }

    #[test]
    fn schlick_bounds() {
        let f0 = schlick_f0(1.0, 1.45);
        assert!((f0 - (0.45f64 / 2.45).powi(2)).abs() < 1e-15);
        assert!((schlick(1.0, f0) - f0).abs() < 1e-15);
        assert!((schlick(0.0, f0) - 1.0).abs() < 1e-15);
        for k in 0..=100 {
            let f = schlick(k as f64 / 100.0, f0);
            assert!((0.0..=1.0).contains(&f));
        }
    }
}
