//! Analytic scene description: glass slabs, textured quads and objects, an
//! area light, and the camera orbit used to photograph them.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::optics::Slab;
use super::OracleError;
use crate::geometry::{Aabb, Vec3};

/// Colour as a function of surface coordinates (cm).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Texture {
    Solid {
        color: Vec3,
    },
    Checker {
        size: f64,
        a: Vec3,
        b: Vec3,
    },
    /// Linear blend from `a` at `start` to `b` at `end` along the first
    /// surface coordinate.
    Gradient {
        start: f64,
        end: f64,
        a: Vec3,
        b: Vec3,
    },
    /// RGB image stretched over `[u0, u1] × [v0, v1]` (nearest texel).
    Image {
        path: PathBuf,
        u0: f64,
        u1: f64,
        v0: f64,
        v1: f64,
        #[serde(skip)]
        pixels: Option<LoadedImage>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadedImage {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<f64>,
}

impl Texture {
    /// Colour at surface coordinates `(u, v)`; `w` is the third world
    /// coordinate, used by the checker so boxes get a 3-D pattern.
    pub fn sample(&self, u: f64, v: f64, w: f64) -> Vec3 {
        match self {
            Texture::Solid { color } => *color,
            Texture::Checker { size, a, b } => {
                let k = (u / size).floor() as i64 + (v / size).floor() as i64 + (w / size).floor() as i64;
                if k.rem_euclid(2) == 0 {
                    *a
                } else {
                    *b
                }
            }
            Texture::Gradient { start, end, a, b } => {
                let s = ((u - start) / (end - start)).clamp(0.0, 1.0);
                *a * (1.0 - s) + *b * s
            }
            Texture::Image {
                u0, u1, v0, v1, pixels, ..
            } => match pixels {
                Some(img) => {
                    let s = ((u - u0) / (u1 - u0)).clamp(0.0, 1.0);
                    let t = ((v1 - v) / (v1 - v0)).clamp(0.0, 1.0);
                    let x = ((s * img.width as f64) as usize).min(img.width - 1);
                    let y = ((t * img.height as f64) as usize).min(img.height - 1);
                    let k = (y * img.width + x) * 3;
                    Vec3::new(img.rgb[k], img.rgb[k + 1], img.rgb[k + 2])
                }
                None => Vec3::splat(0.5),
            },
        }
    }

    fn load(&mut self) -> Result<(), OracleError> {
        if let Texture::Image { path, pixels, .. } = self {
            let img = image::open(&*path)
                .map_err(|e| OracleError::Texture(format!("{}: {e}", path.display())))?
                .to_rgb8();
            *pixels = Some(LoadedImage {
                width: img.width() as usize,
                height: img.height() as usize,
                rgb: img.as_raw().iter().map(|&c| c as f64 / 255.0).collect(),
            });
        }
        Ok(())
    }
}

/// Opaque rectangle perpendicular to a coordinate axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quad {
    /// 0, 1 or 2 for x, y, z.
    pub axis: usize,
    pub offset: f64,
    /// Bounds on the two remaining axes, in increasing axis order.
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub texture: Texture,
}

impl Quad {
    pub fn other_axes(&self) -> (usize, usize) {
        match self.axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Object {
    Box {
        bounds: Aabb,
        texture: Texture,
    },
    Sphere {
        center: Vec3,
        radius: f64,
        texture: Texture,
    },
}

/// Rectangular emitter seen only through specular reflection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaLight {
    pub center: Vec3,
    pub normal: Vec3,
    pub half_size: f64,
    pub intensity: f64,
}

/// Camera orbit around `target`; angles in degrees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub target: Vec3,
    pub radius: f64,
    pub azimuth: [f64; 2],
    pub elevation: [f64; 2],
    /// Horizontal field of view in degrees.
    pub fov_x: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub name: String,
    pub slabs: Vec<Slab>,
    pub walls: Vec<Quad>,
    pub objects: Vec<Object>,
    pub light: Option<AreaLight>,
    /// Multiplier on the Fresnel reflectance; 0 turns reflections off.
    pub reflectivity: f64,
    /// Slab traversals followed per ray before the path is truncated.
    pub max_traversals: usize,
    /// Region the renderer samples in; its longest side is the scene extent.
    pub bounds: Aabb,
    pub orbit: Orbit,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), OracleError> {
        for (i, s) in self.slabs.iter().enumerate() {
            if !(s.index > 1.0) {
                return Err(OracleError::InvalidScene(format!(
                    "slab {i}: refractive index {} ≤ 1",
                    s.index
                )));
            }
            if !(s.thickness > 0.0) {
                return Err(OracleError::InvalidScene(format!(
                    "slab {i}: thickness {} ≤ 0",
                    s.thickness
                )));
            }
            if (s.normal.length() - 1.0).abs() > 1e-9 {
                return Err(OracleError::InvalidScene(format!(
                    "slab {i}: normal is not unit length"
                )));
            }
        }
        for (i, w) in self.walls.iter().enumerate() {
            if w.axis > 2 {
                return Err(OracleError::InvalidScene(format!(
                    "wall {i}: axis {} out of range",
                    w.axis
                )));
            }
        }
        if self.reflectivity < 0.0 {
            return Err(OracleError::InvalidScene("negative reflectivity".into()));
        }
        Ok(())
    }

    /// Loads image textures referenced by the scene.
    pub fn load_textures(&mut self) -> Result<(), OracleError> {
        for w in &mut self.walls {
            w.texture.load()?;
        }
        for o in &mut self.objects {
            match o {
                Object::Box { texture, .. } | Object::Sphere { texture, .. } => texture.load()?,
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, OracleError> {
        let mut scene: SceneSpec = serde_json::from_str(text).map_err(|e| OracleError::InvalidScene(e.to_string()))?;
        scene.validate()?;
        scene.load_textures()?;
        Ok(scene)
    }

    pub fn preset(name: &str) -> Result<Self, OracleError> {
        match name {
            "slab-checker" => Ok(slab_checker()),
            "no-glass" => Ok(no_glass()),
            "showcase" => Ok(showcase()),
            other => Err(OracleError::UnknownPreset(other.to_string())),
        }
    }

    pub const PRESETS: [&'static str; 3] = ["slab-checker", "no-glass", "showcase"];

    /// Longest side of the sampling box.
    pub fn extent(&self) -> f64 {
        self.bounds.extent()
    }
}

fn checker_wall() -> Quad {
    Quad {
        axis: 2,
        offset: -4.0,
        min: [-14.0, -14.0],
        max: [14.0, 14.0],
        texture: Texture::Checker {
            size: 3.0,
            a: Vec3::new(0.58, 0.56, 0.52),
            b: Vec3::new(0.12, 0.2, 0.36),
        },
    }
}

fn inner_objects() -> Vec<Object> {
    vec![
        Object::Box {
            bounds: Aabb::new(Vec3::new(-3.0, -3.0, -3.0), Vec3::new(0.0, 0.5, -1.0)),
            texture: Texture::Checker {
                size: 1.0,
                a: Vec3::new(0.55, 0.2, 0.13),
                b: Vec3::new(0.58, 0.45, 0.18),
            },
        },
        Object::Sphere {
            center: Vec3::new(2.0, 1.0, -2.0),
            radius: 1.5,
            texture: Texture::Gradient {
                start: 0.0,
                end: 3.0,
                a: Vec3::new(0.15, 0.42, 0.2),
                b: Vec3::new(0.5, 0.56, 0.25),
            },
        },
    ]
}

fn desk_orbit() -> Orbit {
    Orbit {
        target: Vec3::new(0.0, 0.0, -1.0),
        radius: 20.0,
        azimuth: [-35.0, 35.0],
        elevation: [-10.0, 25.0],
        fov_x: 40.0,
    }
}

fn desk_bounds() -> Aabb {
    Aabb::new(Vec3::new(-14.0, -14.0, -4.5), Vec3::new(14.0, 14.0, 2.5))
}

/// One glass plate in front of a checker wall and two objects.
pub fn slab_checker() -> SceneSpec {
    SceneSpec {
        name: "slab-checker".into(),
        slabs: vec![Slab {
            point: Vec3::new(0.0, 0.0, 2.0),
            normal: Vec3::new(0.0, 0.0, 1.0),
            thickness: 1.0,
            index: 1.45,
            half_u: 5.0,
            half_v: 5.0,
        }],
        walls: vec![checker_wall()],
        objects: inner_objects(),
        light: Some(AreaLight {
            center: Vec3::new(0.0, 4.0, 7.0),
            normal: Vec3::new(0.0, 0.0, -1.0),
            half_size: 2.0,
            intensity: 12.0,
        }),
        reflectivity: 1.0,
        max_traversals: 8,
        bounds: desk_bounds(),
        orbit: desk_orbit(),
    }
}

/// The same room with the glass removed.
pub fn no_glass() -> SceneSpec {
    SceneSpec {
        name: "no-glass".into(),
        slabs: Vec::new(),
        ..slab_checker()
    }
}

/// A five-sided glass case (no bottom) around the objects.
pub fn showcase() -> SceneSpec {
    let plate = |point: Vec3, normal: Vec3, half_u: f64, half_v: f64| Slab {
        point,
        normal,
        thickness: 1.0,
        index: 1.45,
        half_u,
        half_v,
    };
    SceneSpec {
        name: "showcase".into(),
        slabs: vec![
            plate(Vec3::new(0.0, 0.0, 2.0), Vec3::new(0.0, 0.0, 1.0), 5.0, 5.0),
            plate(Vec3::new(0.0, 0.0, -3.5), Vec3::new(0.0, 0.0, -1.0), 5.0, 5.0),
            plate(Vec3::new(-5.0, 0.0, -0.75), Vec3::new(-1.0, 0.0, 0.0), 2.75, 5.0),
            plate(Vec3::new(5.0, 0.0, -0.75), Vec3::new(1.0, 0.0, 0.0), 2.75, 5.0),
            plate(Vec3::new(0.0, 5.0, -0.75), Vec3::new(0.0, 1.0, 0.0), 2.75, 5.0),
        ],
        walls: vec![Quad {
            offset: -6.0,
            ..checker_wall()
        }],
        bounds: Aabb::new(Vec3::new(-14.0, -14.0, -6.5), Vec3::new(14.0, 14.0, 2.5)),
        ..slab_checker()
    }
}
