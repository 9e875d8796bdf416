use serde::{Deserialize, Serialize};

use super::RenderError;
use crate::geometry::{transform_dir, transform_point, Aabb, Mat4, Vec3};

/// Pinhole camera. Pixel `(i, j)` has its centre at `(i + 0.5, j + 0.5)`;
/// the camera looks down local −z with +y up and image rows growing down.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub width: usize,
    pub height: usize,
    /// Focal length in pixels.
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub camera_to_world: Mat4,
}

impl Camera {
    /// Camera with horizontal field of view `camera_angle_x` (radians) and
    /// the principal point at the image centre.
    pub fn from_fov(width: usize, height: usize, camera_angle_x: f64, camera_to_world: Mat4) -> Self {
        let focal = 0.5 * width as f64 / (0.5 * camera_angle_x).tan();
        Self {
            width,
            height,
            focal,
            cx: 0.5 * width as f64,
            cy: 0.5 * height as f64,
            camera_to_world,
        }
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        if !(self.focal > 0.0 && self.focal.is_finite()) || self.width == 0 || self.height == 0 {
            return Err(RenderError::InvalidCamera(format!(
                "focal {} and size {}x{}",
                self.focal, self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn origin(&self) -> Vec3 {
        transform_point(&self.camera_to_world, Vec3::ZERO)
    }

    /// World-space unit direction through continuous image coordinates.
    pub fn direction_at(&self, u: f64, v: f64) -> Vec3 {
        let local = Vec3::new((u - self.cx) / self.focal, -(v - self.cy) / self.focal, -1.0);
        transform_dir(&self.camera_to_world, local).normalized()
    }
}

/// Ray with its sampling interval (scene units).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
    pub near: f64,
    pub far: f64,
}

impl Ray {
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// Sampling interval: global `[near, far]`, optionally clipped to a box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayBounds {
    pub near: f64,
    pub far: f64,
    pub aabb: Option<Aabb>,
}

impl RayBounds {
    pub fn interval(&self, origin: Vec3, dir: Vec3) -> (f64, f64) {
        if let Some(b) = &self.aabb {
            if let Some((t0, t1)) = b.intersect(origin, dir) {
                let (n, f) = (t0.max(self.near), t1.min(self.far));
                if f > n + 1e-6 {
                    return (n, f);
                }
            }
        }
        (self.near, self.far)
    }
}

/// Rays through the centres of the given `(column, row)` pixels.
pub fn generate_rays(camera: &Camera, pixels: &[(usize, usize)], bounds: &RayBounds) -> Result<Vec<Ray>, RenderError> {
    camera.validate()?;
    if !(bounds.near >= 0.0 && bounds.far > bounds.near) {
        return Err(RenderError::InvalidCamera(format!(
            "sampling interval [{}, {}]",
            bounds.near, bounds.far
        )));
    }
    let origin = camera.origin();
    pixels
        .iter()
        .map(|&(i, j)| {
            if i >= camera.width || j >= camera.height {
                return Err(RenderError::PixelOutOfBounds {
                    x: i,
                    y: j,
                    width: camera.width,
                    height: camera.height,
                });
            }
            let direction = camera.direction_at(i as f64 + 0.5, j as f64 + 0.5);
            let (near, far) = bounds.interval(origin, direction);
            Ok(Ray {
                origin,
                direction,
                near,
                far,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::look_at;

    const IDENTITY: Mat4 = [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ];

    fn bounds() -> RayBounds {
        RayBounds {
            near: 0.5,
            far: 4.0,
            aabb: None,
        }
    }

    #[test]
    fn principal_point_ray_follows_optical_axis() {
        let c2w = look_at(Vec3::new(1.0, 2.0, 10.0), Vec3::ZERO, Vec3::new(0.0, 1.0, 0.0));
        let cam = Camera::from_fov(64, 64, 0.8, c2w);
        // 64 px: the principal point sits between pixels 31 and 32
        let d = cam.direction_at(32.0, 32.0);
        let axis = (Vec3::ZERO - Vec3::new(1.0, 2.0, 10.0)).normalized();
        assert!((d - axis).length() < 1e-12);
        let cam = Camera::from_fov(63, 63, 0.8, IDENTITY);
        let r = generate_rays(&cam, &[(31, 31)], &bounds()).unwrap();
        assert!((r[0].direction - Vec3::new(0.0, 0.0, -1.0)).length() < 1e-12);
    }

    #[test]
    fn identity_extrinsics_put_origin_at_world_origin() {
        let cam = Camera::from_fov(8, 8, 1.0, IDENTITY);
        let r = generate_rays(&cam, &[(0, 0), (7, 7)], &bounds()).unwrap();
        assert!(r.iter().all(|ray| ray.origin == Vec3::ZERO));
        assert!(r.iter().all(|ray| (ray.direction.length() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn corner_of_90_degree_view_is_45_degrees_off_axis() {
        let cam = Camera::from_fov(64, 64, std::f64::consts::FRAC_PI_2, IDENTITY);
        let d = cam.direction_at(0.0, 0.0);
        // before normalisation the direction is (-1, 1, -1)
        assert!((d.x / d.z - 1.0).abs() < 1e-12);
        assert!((d.y / -d.z - 1.0).abs() < 1e-12);
        assert!(((d.x / d.z).atan().to_degrees() - 45.0).abs() < 1e-9);
    }

    #[test]
    fn out_of_bounds_pixel_is_an_error() {
        let cam = Camera::from_fov(8, 4, 1.0, IDENTITY);
        assert!(matches!(
            generate_rays(&cam, &[(8, 0)], &bounds()),
            Err(RenderError::PixelOutOfBounds { x: 8, .. })
        ));
        assert!(generate_rays(&cam, &[(0, 4)], &bounds()).is_err());
    }

    #[test]
    fn non_positive_focal_is_rejected() {
        let mut cam = Camera::from_fov(8, 8, 1.0, IDENTITY);
        cam.focal = 0.0;
        assert!(matches!(
            generate_rays(&cam, &[(0, 0)], &bounds()),
            Err(RenderError::InvalidCamera(_))
        ));
    }

    #[test]
    fn aabb_clips_sampling_interval() {
        let b = RayBounds {
            near: 0.1,
            far: 100.0,
            aabb: Some(Aabb::new(Vec3::splat(-1.0), Vec3::splat(1.0))),
        };
        let (n, f) = b.interval(Vec3::new(0.0, 0.0, 5.0), Vec3::new(0.0, 0.0, -1.0));
        assert!((n - 4.0).abs() < 1e-12 && (f - 6.0).abs() < 1e-12);
        let (n, f) = b.interval(Vec3::new(5.0, 0.0, 5.0), Vec3::new(0.0, 0.0, -1.0));
        assert_eq!((n, f), (0.1, 100.0));
    }
}
