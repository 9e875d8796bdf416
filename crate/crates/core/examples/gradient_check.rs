//! Builds a small model, renders two rays, and compares reverse-mode
//! gradients of the training objective with central differences for a
//! sample of parameters from every network.
//!
//! ```text
//! cargo run --example gradient_check
//! ```

use glassnerf::autodiff::Graph;
use glassnerf::fields::{EncodingConfig, FieldConfig, Model};
use glassnerf::geometry::{look_at, Vec3};
use glassnerf::render::{generate_rays, Camera, RayBounds};
use glassnerf::train::{batch_loss, TrainConfig};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = TrainConfig::desk();
    config.field = FieldConfig {
        width: 16,
        feature_dim: 8,
        position_encoding: EncodingConfig::new(4, true),
        direction_encoding: EncodingConfig::new(2, true),
        zero_init_offsets: false,
        ..config.field
    };
    config.render.coarse_samples = 4;
    config.render.glass_samples = 2;
    config.render.vi_samples = 2;
    config.render.bounds = RayBounds {
        near: 2.0,
        far: 6.0,
        aabb: None,
    };
    let mut model = Model::<f64>::new(config.field.clone());
    let cam = Camera::from_fov(
        8,
        8,
        0.7,
        look_at(Vec3::new(0.0, 0.5, 4.0), Vec3::ZERO, Vec3::new(0.0, 1.0, 0.0)),
    );
    let rays = generate_rays(&cam, &[(2, 3), (5, 4)], &config.render.bounds)?;
    let targets = [0.8, 0.3, 0.2, 0.1, 0.6, 0.9];

    let g = Graph::new();
    let (out, terms) = batch_loss::<f64, ChaCha8Rng>(&g, &model, &rays, &targets, &config, None, None)?;
    let fine = out.fine.as_ref().ok_or("no fine pass")?;
    let fine_t: Vec<Vec<f64>> = fine.t.chunks(fine.samples).map(<[f64]>::to_vec).collect();
    model.store.zero_grad();
    g.backward_into(terms.total, &mut model.store)?;
    drop(g);

    let loss = |m: &Model<f64>| -> Result<f64, Box<dyn std::error::Error>> {
        let g = Graph::new();
        let (_, t) = batch_loss::<f64, ChaCha8Rng>(&g, m, &rays, &targets, &config, None, Some(&fine_t))?;
        let v = g.value(t.total).item().ok_or("scalar loss")?;
        Ok(v)
    };
    let h = 1e-6;
    let ids: Vec<_> = model.store.ids().collect();
    for id in ids {
        let name = model.store.name(id).to_string();
        if !name.ends_with(".bias") {
            continue;
        }
        let analytic = model.store.get(id).grad().map_or(0.0, |g| g[0]);
        let orig = model.store.get(id).data()[0];
        model.store.get_mut(id).data_mut()[0] = orig + h;
        let up = loss(&model)?;
        model.store.get_mut(id).data_mut()[0] = orig - h;
        let down = loss(&model)?;
        model.store.get_mut(id).data_mut()[0] = orig;
        let fd = (up - down) / (2.0 * h);
        println!("{name:<32} analytic {analytic:>13.6e}  numeric {fd:>13.6e}");
    }
    Ok(())
}
