//! Positional encoding and the four trainable networks: the glass network
//! (refraction density and ray offsets), the decomposition radiance network
//! (coarse and fine copies), the feature decoder and the blending gate.

mod encoding;
mod mlp;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, Graph, ParamId, ParamStore, Real, Tensor, Var};
use crate::geometry::Vec3;

pub use encoding::{positional_encode, EncodingConfig};
pub use mlp::{Init, Linear};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("direction {index} has norm {norm}, expected unit length")]
    NonUnitDirection { index: usize, norm: f64 },
    #[error("feature width {got} does not match decoder input width {expected}")]
    FeatureWidth { got: usize, expected: usize },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

/// Network sizes and input normalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    /// Hidden width `W` shared by every trunk.
    pub width: usize,
    pub glass_depth: usize,
    pub nerf_depth: usize,
    /// Trunk layer (0-based) whose input is re-concatenated with the encoded
    /// position.
    pub skip_layer: usize,
    /// Width θ of the view-dependent feature vector.
    pub feature_dim: usize,
    pub position_encoding: EncodingConfig,
    pub direction_encoding: EncodingConfig,
    /// Positions are encoded as `(x − center) / scale`.
    pub center: [f64; 3],
    pub scale: f64,
    /// Added to the glass density head bias before the softplus.
    pub glass_density_bias: f64,
    /// Added to the radiance-field density head biases before the softplus.
    #[serde(default)]
    pub density_bias: f64,
    /// Added to the gate output bias before its sigmoid; negative values
    /// start training with little view-dependent blending.
    #[serde(default)]
    pub gate_bias: f64,
    /// Zero the final offset layer so training starts from straight rays.
    pub zero_init_offsets: bool,
    pub seed: u64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            width: 64,
            glass_depth: 7,
            nerf_depth: 8,
            skip_layer: 5,
            feature_dim: 64,
            position_encoding: EncodingConfig::new(10, true),
            direction_encoding: EncodingConfig::new(4, true),
            center: [0.0; 3],
            scale: 1.0,
            glass_density_bias: 0.0,
            density_bias: 0.0,
            gate_bias: 0.0,
            zero_init_offsets: true,
            seed: 0,
        }
    }
}

/// Per-sample glass-network outputs: `density [n,1] ≥ 0`, `offset [n,3]`.
#[derive(Clone, Copy, Debug)]
pub struct GlassFieldOutput {
    pub density: Var,
    pub offset: Var,
}

/// Per-sample radiance outputs. The view-dependent pair is absent when the
/// network runs without its view-dependent heads.
#[derive(Clone, Copy, Debug)]
pub struct RadianceFieldOutput {
    pub density_vi: Var,
    pub color_vi: Var,
    pub density_vd: Option<Var>,
    pub feature_vd: Option<Var>,
}

#[derive(Clone, Debug)]
pub struct GlassNetwork {
    pub trunk: Vec<Linear>,
    pub density: Linear,
    pub offset_hidden: Linear,
    pub offset_out: Linear,
}

#[derive(Clone, Debug)]
pub struct NerfNetwork {
    pub trunk: Vec<Linear>,
    pub skip_layer: usize,
    pub density_vi: Linear,
    pub color_hidden: Linear,
    pub color_out: Linear,
    pub feature: Linear,
    pub vd_hidden: Linear,
    pub density_vd: Linear,
    pub feature_out: Linear,
}

/// Two-layer head mapping the rendered feature to RGB (decoder) or to the
/// blending scalar (gate); both end in a sigmoid.
#[derive(Clone, Debug)]
pub struct FeatureHead {
    pub hidden: Linear,
    pub out: Linear,
}

/// Every network plus the parameter store they index into.
#[derive(Clone, Debug)]
pub struct Model<T> {
    pub config: FieldConfig,
    pub store: ParamStore<T>,
    pub glass: GlassNetwork,
    pub coarse: NerfNetwork,
    pub fine: NerfNetwork,
    pub decoder: FeatureHead,
    pub gate: FeatureHead,
}

fn build_trunk<T: Real>(
    store: &mut ParamStore<T>,
    name: &str,
    depth: usize,
    input: usize,
    width: usize,
    skip: Option<usize>,
    rng: &mut ChaCha8Rng,
) -> Vec<Linear> {
    (0..depth)
        .map(|i| {
            let fan_in = match (i, skip) {
                (0, _) => input,
                (i, Some(s)) if i == s => width + input,
                _ => width,
            };
            Linear::new(store, &format!("{name}.trunk{i}"), fan_in, width, Init::Uniform, rng)
        })
        .collect()
}

impl<T: Real> Model<T> {
    pub fn new(config: FieldConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let w = config.width;
        let half = (w / 2).max(1);
        let pos = config.position_encoding.width();
        let dir = config.direction_encoding.width();
        let rng = &mut rng;

        let glass = {
            let s = &mut store;
            let trunk = build_trunk(s, "glass", config.glass_depth, pos, w, None, rng);
            let density = Linear::new(s, "glass.density", w, 1, Init::Uniform, rng);
            let offset_hidden = Linear::new(s, "glass.offset.hidden", w + dir, half, Init::Uniform, rng);
            let out_init = if config.zero_init_offsets {
                Init::Zeros
            } else {
                Init::Uniform
            };
            let offset_out = Linear::new(s, "glass.offset.out", half, 3, out_init, rng);
            let b = s.get_mut(density.bias);
            b.data_mut()[0] += T::of(config.glass_density_bias);
            GlassNetwork {
                trunk,
                density,
                offset_hidden,
                offset_out,
            }
        };

        let nerf = |name: &str, store: &mut ParamStore<T>, rng: &mut ChaCha8Rng| {
            let skip = (config.skip_layer < config.nerf_depth && config.skip_layer > 0).then_some(config.skip_layer);
            NerfNetwork {
                trunk: build_trunk(store, name, config.nerf_depth, pos, w, skip, rng),
                skip_layer: skip.unwrap_or(usize::MAX),
                density_vi: Linear::new(store, &format!("{name}.density_vi"), w, 1, Init::Uniform, rng),
                color_hidden: Linear::new(store, &format!("{name}.color_hidden"), w, half, Init::Uniform, rng),
                color_out: Linear::new(store, &format!("{name}.color_out"), half, 3, Init::Uniform, rng),
                feature: Linear::new(store, &format!("{name}.feature"), w, w, Init::Uniform, rng),
                vd_hidden: Linear::new(store, &format!("{name}.vd_hidden"), w + dir, half, Init::Uniform, rng),
                density_vd: Linear::new(store, &format!("{name}.density_vd"), half, 1, Init::Uniform, rng),
                feature_out: Linear::new(
                    store,
                    &format!("{name}.feature_out"),
                    half,
                    config.feature_dim,
                    Init::Uniform,
                    rng,
                ),
            }
        };
        let coarse = nerf("nerf_coarse", &mut store, rng);
        let fine = nerf("nerf_fine", &mut store, rng);
        for net in [&coarse, &fine] {
            for head in [&net.density_vi, &net.density_vd] {
                store.get_mut(head.bias).data_mut()[0] += T::of(config.density_bias);
            }
        }

        let head = |name: &str, outputs: usize, store: &mut ParamStore<T>, rng: &mut ChaCha8Rng| FeatureHead {
            hidden: Linear::new(
                store,
                &format!("{name}.hidden"),
                config.feature_dim,
                w,
                Init::Uniform,
                rng,
            ),
            out: Linear::new(store, &format!("{name}.out"), w, outputs, Init::Uniform, rng),
        };
        let decoder = head("decoder", 3, &mut store, rng);
        let gate = head("gate", 1, &mut store, rng);
        store.get_mut(gate.out.bias).data_mut()[0] += T::of(config.gate_bias);

        Self {
            config,
            store,
            glass,
            coarse,
            fine,
            decoder,
            gate,
        }
    }

    /// Same architecture with the parameters converted to another precision.
    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            store: self.store.cast(),
            glass: self.glass.clone(),
            coarse: self.coarse.clone(),
            fine: self.fine.clone(),
            decoder: self.decoder.clone(),
            gate: self.gate.clone(),
        }
    }

    /// Parameter ids whose names start with `prefix`.
    pub fn params_with_prefix(&self, prefix: &str) -> Vec<ParamId> {
        self.store
            .ids()
            .filter(|&id| self.store.name(id).starts_with(prefix))
            .collect()
    }

    fn normalize(&self, g: &Graph<T>, x: Var) -> Result<Var, AutodiffError> {
        let c = self.config.center;
        let shift = g.constant(Tensor::from_f64(&[1, 3], &[-c[0], -c[1], -c[2]])?);
        let centered = g.add(x, shift)?;
        Ok(g.scale(centered, T::of(1.0 / self.config.scale)))
    }

    /// Glass density (position only) and ray offsets (position and
    /// direction) for `[n, 3]` positions and unit directions.
    pub fn glass_field(&self, g: &Graph<T>, x: Var, d: Var) -> Result<GlassFieldOutput, FieldError> {
        check_unit_directions(g, d)?;
        let s = &self.store;
        let net = &self.glass;
        let xn = self.normalize(g, x)?;
        let ex = self.config.position_encoding.encode(g, xn)?;
        let ed = self.config.direction_encoding.encode(g, d)?;
        let mut h = ex;
        for layer in &net.trunk {
            h = g.relu(layer.forward(g, s, h)?);
        }
        let density = g.softplus(net.density.forward(g, s, h)?);
        let o = g.concat(&[h, ed], 1)?;
        let o = g.relu(net.offset_hidden.forward(g, s, o)?);
        let offset = net.offset_out.forward(g, s, o)?;
        Ok(GlassFieldOutput { density, offset })
    }

    /// Radiance field on adjusted positions. `fine` selects the fine copy;
    /// `view_dependent = false` skips the view-dependent heads.
    pub fn nerf_field(
        &self,
        g: &Graph<T>,
        x: Var,
        d: Var,
        fine: bool,
        view_dependent: bool,
    ) -> Result<RadianceFieldOutput, FieldError> {
        check_unit_directions(g, d)?;
        let s = &self.store;
        let net = if fine { &self.fine } else { &self.coarse };
        let xn = self.normalize(g, x)?;
        let ex = self.config.position_encoding.encode(g, xn)?;
        let mut h = ex;
        for (i, layer) in net.trunk.iter().enumerate() {
            if i == net.skip_layer {
                h = g.concat(&[h, ex], 1)?;
            }
            h = g.relu(layer.forward(g, s, h)?);
        }
        let density_vi = g.softplus(net.density_vi.forward(g, s, h)?);
        let c = g.relu(net.color_hidden.forward(g, s, h)?);
        let color_vi = g.sigmoid(net.color_out.forward(g, s, c)?);
        if !view_dependent {
            return Ok(RadianceFieldOutput {
                density_vi,
                color_vi,
                density_vd: None,
                feature_vd: None,
            });
        }
        let ed = self.config.direction_encoding.encode(g, d)?;
        let feat = net.feature.forward(g, s, h)?;
        let v = g.concat(&[feat, ed], 1)?;
        let v = g.relu(net.vd_hidden.forward(g, s, v)?);
        let density_vd = g.softplus(net.density_vd.forward(g, s, v)?);
        let feature_vd = net.feature_out.forward(g, s, v)?;
        Ok(RadianceFieldOutput {
            density_vi,
            color_vi,
            density_vd: Some(density_vd),
            feature_vd: Some(feature_vd),
        })
    }

    /// Maps rendered features `[r, θ]` to the reflection colour `[r, 3]` and
    /// the blending scalar `[r, 1]`.
    pub fn decode_and_gate(&self, g: &Graph<T>, features: Var) -> Result<(Var, Var), FieldError> {
        let shape = g.shape(features);
        let width = shape.get(1).copied().unwrap_or(0);
        if shape.len() != 2 || width != self.config.feature_dim {
            return Err(FieldError::FeatureWidth {
                got: width,
                expected: self.config.feature_dim,
            });
        }
        let s = &self.store;
        let head = |h: &FeatureHead| -> Result<Var, AutodiffError> {
            let z = g.relu(h.hidden.forward(g, s, features)?);
            Ok(g.sigmoid(h.out.forward(g, s, z)?))
        };
        Ok((head(&self.decoder)?, head(&self.gate)?))
    }
}

fn check_unit_directions<T: Real>(g: &Graph<T>, d: Var) -> Result<(), FieldError> {
    let v = g.value(d);
    let tol = 1e-6;
    for (i, c) in v.data().chunks(3).enumerate() {
        let n = c.iter().map(|x| x.to_f64c().powi(2)).sum::<f64>().sqrt();
        if (n - 1.0).abs() > tol {
            return Err(FieldError::NonUnitDirection { index: i, norm: n });
        }
    }
    Ok(())
}

/// Packs 3-vectors into a `[n, 3]` tensor.
pub fn points_tensor<T: Real>(points: &[Vec3]) -> Tensor<T> {
    let data = points
        .iter()
        .flat_map(|p| [T::of(p.x), T::of(p.y), T::of(p.z)])
        .collect();
    Tensor::new(&[points.len(), 3], data).expect("shape")
}

#[cfg(test)]
mod tests;
