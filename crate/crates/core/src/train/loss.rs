//! Photometric and offset-regularization losses.

use crate::autodiff::{AutodiffError, Graph, Real, Var};

/// `Σ_r ‖pred(r) − target(r)‖²` over `[R, 3]` batches.
pub fn render_loss<T: Real>(g: &Graph<T>, pred: Var, target: Var) -> Result<Var, AutodiffError> {
    let (ps, ts) = (g.shape(pred), g.shape(target));
    if ps != ts {
        return Err(AutodiffError::ShapeMismatch {
            op: "render_loss",
            lhs: ps,
            rhs: ts,
        });
    }
    let diff = g.sub(pred, target)?;
    Ok(g.sum(g.mul(diff, diff)?))
}

/// `sqrt(Σ Δx²)` over every offset tensor given: one root over the whole
/// batch sum.
pub fn offset_loss<T: Real>(g: &Graph<T>, offsets: &[Var]) -> Result<Var, AutodiffError> {
    let mut total = g.scalar(T::zero());
    for &o in offsets {
        let sq = g.sum(g.mul(o, o)?);
        total = g.add(total, sq)?;
    }
    Ok(g.sqrt(total))
}

/// `render + ε · offset`.
pub fn total_loss<T: Real>(g: &Graph<T>, render: Var, offset: Var, epsilon: f64) -> Result<Var, AutodiffError> {
    g.add(render, g.scale(offset, T::of(epsilon)))
}
