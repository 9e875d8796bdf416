//! Composites a single hand-made ray: glass weights bend the sample
//! positions, view-independent colour and a view-dependent feature are
//! integrated, and the two colours are blended.
//!
//! ```text
//! cargo run --example volume_rendering
//! ```

use glassnerf::autodiff::{Graph, Tensor};
use glassnerf::render::{accumulate_offsets, composite, refraction_weights, render_feature, render_view_independent};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = Graph::<f64>::new();
    let c = |shape: &[usize], v: &[f64]| -> Result<_, Box<dyn std::error::Error>> {
        Ok(g.constant(Tensor::from_f64(shape, v)?))
    };
    let n = 4;
    let t = [2.5, 3.5, 4.5, 5.5];
    let deltas = c(&[1, n], &[1.0; 4])?;
    let positions: Vec<f64> = t.iter().flat_map(|&z| [0.0, 0.0, -z]).collect();

    // a thin glass layer at the second sample pushes everything behind it sideways
    let glass = c(&[1, n], &[0.0, 3.0, 0.0, 0.0])?;
    let w_gl = refraction_weights(&g, glass, deltas)?;
    let offsets = c(
        &[1, n, 3],
        &[0.0, 0.0, 0.0, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    )?;
    let adjusted = accumulate_offsets(&g, c(&[1, n, 3], &positions)?, w_gl, offsets)?;
    println!("glass weights    {:?}", g.value(w_gl).data());
    println!("adjusted points  {:?}", g.value(adjusted).data());

    let density = c(&[1, n], &[0.0, 0.0, 5.0, 0.0])?;
    let colors = c(
        &[1, n, 3],
        &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.9, 0.2, 0.1, 0.0, 0.0, 0.0],
    )?;
    let vi = render_view_independent(&g, density, colors, deltas, c(&[1, n], &t)?)?;
    println!(
        "C_vi {:?}  depth {:?}",
        g.value(vi.color).data(),
        g.value(vi.depth).data()
    );

    let feature = render_feature(
        &g,
        c(&[1, n], &[0.0, 2.0, 0.0, 0.0])?,
        c(&[1, n, 2], &[0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, 0.0])?,
        deltas,
    )?;
    println!("rendered feature {:?}", g.value(feature).data());

    let blended = composite(&g, vi.color, c(&[1, 3], &[1.0, 1.0, 1.0])?, c(&[1, 1], &[0.25])?)?;
    println!("C = C_vi + α·C_vd = {:?}", g.value(blended).data());
    Ok(())
}
