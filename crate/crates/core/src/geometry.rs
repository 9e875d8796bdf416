//! Small fixed-size vector math in `f64`, shared by the renderer and the
//! analytic tracer.

use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn splat(v: f64) -> Self {
        Self::new(v, v, v)
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn length(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Self {
        self / self.length()
    }

    pub fn mul_elem(self, o: Self) -> Self {
        Self::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    pub fn min(self, o: Self) -> Self {
        Self::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Self) -> Self {
        Self::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn max_elem(self) -> f64 {
        self.x.max(self.y).max(self.z)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn clamp01(self) -> Self {
        Self::new(self.x.clamp(0.0, 1.0), self.y.clamp(0.0, 1.0), self.z.clamp(0.0, 1.0))
    }

    /// Mirror direction about a unit normal.
    pub fn reflect(self, n: Self) -> Self {
        self - n * (2.0 * self.dot(n))
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn size(&self) -> Vec3 {
        self.max - self.min
    }

    /// Longest side length.
    pub fn extent(&self) -> f64 {
        self.size().max_elem()
    }

    /// Slab-test entry/exit distances, or `None` when the line misses.
    pub fn intersect(&self, origin: Vec3, dir: Vec3) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for a in 0..3 {
            let (o, d) = (origin[a], dir[a]);
            if d.abs() < 1e-15 {
                if o < self.min[a] || o > self.max[a] {
                    return None;
                }
                continue;
            }
            let (mut ta, mut tb) = ((self.min[a] - o) / d, (self.max[a] - o) / d);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
        }
        (t0 < t1).then_some((t0, t1))
    }
}

/// Row-major 4×4 rigid transform (camera-to-world).
pub type Mat4 = [[f64; 4]; 4];

pub fn transform_point(m: &Mat4, p: Vec3) -> Vec3 {
    Vec3::new(
        m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z + m[0][3],
        m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z + m[1][3],
        m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z + m[2][3],
    )
}

pub fn transform_dir(m: &Mat4, d: Vec3) -> Vec3 {
    Vec3::new(
        m[0][0] * d.x + m[0][1] * d.y + m[0][2] * d.z,
        m[1][0] * d.x + m[1][1] * d.y + m[1][2] * d.z,
        m[2][0] * d.x + m[2][1] * d.y + m[2][2] * d.z,
    )
}

/// Camera-to-world matrix for a camera at `eye` looking at `target`,
/// using the convention that the camera looks down its local −z with +y up.
pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> Mat4 {
    let back = (eye - target).normalized();
    let right = up.cross(back).normalized();
    let true_up = back.cross(right);
    [
        [right.x, true_up.x, back.x, eye.x],
        [right.y, true_up.y, back.y, eye.y],
        [right.z, true_up.z, back.z, eye.z],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

/// Checks that the upper-left 3×3 block is orthonormal with determinant +1
/// and the last row is `[0, 0, 0, 1]`, all within `tol`.
pub fn is_rigid(m: &Mat4, tol: f64) -> bool {
    let col = |j: usize| Vec3::new(m[0][j], m[1][j], m[2][j]);
    let (a, b, c) = (col(0), col(1), col(2));
    let ortho = (a.dot(a) - 1.0).abs() < tol
        && (b.dot(b) - 1.0).abs() < tol
        && (c.dot(c) - 1.0).abs() < tol
        && a.dot(b).abs() < tol
        && a.dot(c).abs() < tol
        && b.dot(c).abs() < tol;
    let det = a.cross(b).dot(c);
    let last = m[3] == [0.0, 0.0, 0.0, 1.0];
    ortho && (det - 1.0).abs() < tol && last
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn look_at_is_rigid_and_points_at_target() {
        let eye = Vec3::new(3.0, 4.0, 12.0);
        let m = look_at(eye, Vec3::ZERO, Vec3::new(0.0, 1.0, 0.0));
        assert!(is_rigid(&m, 1e-12));
        let fwd = transform_dir(&m, Vec3::new(0.0, 0.0, -1.0));
        let expect = (Vec3::ZERO - eye).normalized();
        assert!((fwd - expect).length() < 1e-12);
        assert_eq!(transform_point(&m, Vec3::ZERO), eye);
    }

    #[test]
    fn aabb_intersection() {
        let b = Aabb::new(Vec3::splat(-1.0), Vec3::splat(1.0));
        let (t0, t1) = b
            .intersect(Vec3::new(0.0, 0.0, 5.0), Vec3::new(0.0, 0.0, -1.0))
            .unwrap();
        assert!((t0 - 4.0).abs() < 1e-12 && (t1 - 6.0).abs() < 1e-12);
        assert!(b
            .intersect(Vec3::new(3.0, 0.0, 5.0), Vec3::new(0.0, 0.0, -1.0))
            .is_none());
        assert_eq!(b.extent(), 2.0);
    }

    #[test]
    fn non_rigid_rejected() {
        let mut m = look_at(Vec3::new(0.0, 0.0, 5.0), Vec3::ZERO, Vec3::new(0.0, 1.0, 0.0));
        m[0][0] *= 1.1;
        assert!(!is_rigid(&m, 1e-6));
    }
}
