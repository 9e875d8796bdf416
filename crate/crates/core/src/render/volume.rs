//! Volume-rendering primitives on the tape. Per-ray quantities are laid out
//! as `[rays, samples]` (scalars) or `[rays, samples, k]` (vectors).

use super::RenderError;
use crate::autodiff::{Graph, Real, Var};

fn check_nonnegative<T: Real>(g: &Graph<T>, density: Var, what: &'static str) -> Result<(), RenderError> {
    if let Some(bad) = g.value(density).data().iter().find(|v| !(**v >= T::zero())) {
        return Err(RenderError::NegativeDensity {
            field: what,
            value: bad.to_f64c(),
        });
    }
    Ok(())
}

/// `w_i = T_i (1 − exp(−σ_i δ_i))` with `T_i = exp(−Σ_{j<i} σ_j δ_j)`.
pub fn volume_weights<T: Real>(g: &Graph<T>, density: Var, deltas: Var) -> Result<Var, RenderError> {
    let tau = g.mul(density, deltas)?;
    let before = g.cumsum(tau, 1, true)?;
    let transmittance = g.exp(g.neg(before));
    let opacity = g.shift(g.neg(g.exp(g.neg(tau))), T::one());
    Ok(g.mul(transmittance, opacity)?)
}

/// Refraction weights from glass density `[R, N]` and intervals `[R, N]`.
pub fn refraction_weights<T: Real>(g: &Graph<T>, glass_density: Var, deltas: Var) -> Result<Var, RenderError> {
    check_nonnegative(g, glass_density, "glass")?;
    volume_weights(g, glass_density, deltas)
}

/// `x′_i = x_i + Σ_{j≤i} w_j Δx_j` for positions and offsets `[R, N, 3]`
/// and weights `[R, N]`.
pub fn accumulate_offsets<T: Real>(
    g: &Graph<T>,
    positions: Var,
    weights: Var,
    offsets: Var,
) -> Result<Var, RenderError> {
    let shape = g.shape(weights);
    let w = g.reshape(weights, &[shape[0], shape[1], 1])?;
    let shifts = g.mul(w, offsets)?;
    let running = g.cumsum(shifts, 1, false)?;
    Ok(g.add(positions, running)?)
}

/// Weighted sum over samples of per-sample vectors `[R, N, k]` → `[R, k]`.
pub fn integrate<T: Real>(g: &Graph<T>, weights: Var, values: Var) -> Result<Var, RenderError> {
    let shape = g.shape(weights);
    let w = g.reshape(weights, &[shape[0], shape[1], 1])?;
    let prod = g.mul(w, values)?;
    Ok(g.sum_axis(prod, 1)?)
}

/// View-independent branch output.
#[derive(Clone, Copy, Debug)]
pub struct ViewIndependent {
    /// `[R, 3]`
    pub color: Var,
    /// `[R]`, weighted sample distance.
    pub depth: Var,
    /// `[R]`, total weight (opacity) along the ray.
    pub opacity: Var,
    /// `[R, N]`
    pub weights: Var,
}

/// Colour, depth and accumulated opacity of the view-independent field.
pub fn render_view_independent<T: Real>(
    g: &Graph<T>,
    density: Var,
    color: Var,
    deltas: Var,
    t_values: Var,
) -> Result<ViewIndependent, RenderError> {
    check_nonnegative(g, density, "view-independent")?;
    let weights = volume_weights(g, density, deltas)?;
    let color = integrate(g, weights, color)?;
    let depth = g.sum_axis(g.mul(weights, t_values)?, 1)?;
    let opacity = g.sum_axis(weights, 1)?;
    Ok(ViewIndependent {
        color,
        depth,
        opacity,
        weights,
    })
}

/// `F_vd = Σ T_i (1 − exp(−σ_vd,i δ_i)) f_i` with transmittance from σ_vd.
pub fn render_feature<T: Real>(g: &Graph<T>, density: Var, features: Var, deltas: Var) -> Result<Var, RenderError> {
    check_nonnegative(g, density, "view-dependent")?;
    let weights = volume_weights(g, density, deltas)?;
    integrate(g, weights, features)
}

/// `C = C_vi + α · C_vd` (`[R,3]`, `[R,3]`, `[R,1]`).
pub fn composite<T: Real>(g: &Graph<T>, color_vi: Var, color_vd: Var, alpha: Var) -> Result<Var, RenderError> {
    let reflected = g.mul(alpha, color_vd)?;
    Ok(g.add(color_vi, reflected)?)
}
