use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::Graph;

fn small_config() -> FieldConfig {
    FieldConfig {
        width: 16,
        glass_depth: 3,
        nerf_depth: 4,
        skip_layer: 2,
        feature_dim: 8,
        position_encoding: EncodingConfig::new(3, true),
        direction_encoding: EncodingConfig::new(2, true),
        ..FieldConfig::default()
    }
}

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|_| {
            Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
        })
        .collect()
}

fn random_dirs(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
    random_points(rng, n)
        .into_iter()
        .map(|p| (p + Vec3::new(0.0, 0.0, 2.0)).normalized())
        .collect()
}

#[test]
fn fresh_offsets_are_zero() {
    let model = Model::<f64>::new(small_config());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g = Graph::new();
    let x = g.constant(points_tensor(&random_points(&mut rng, 10)));
    let d = g.constant(points_tensor(&random_dirs(&mut rng, 10)));
    let out = model.glass_field(&g, x, d).unwrap();
    assert!(g.value(out.offset).data().iter().all(|&v| v == 0.0));
    assert!(g.value(out.density).data().iter().all(|&v| v >= 0.0));
}

#[test]
fn glass_density_ignores_direction() {
    let model = Model::<f64>::new(FieldConfig {
        zero_init_offsets: false,
        ..small_config()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pts = random_points(&mut rng, 8);
    let eval = |dirs: &[Vec3]| {
        let g = Graph::new();
        let x = g.constant(points_tensor(&pts));
        let d = g.constant(points_tensor(dirs));
        let out = model.glass_field(&g, x, d).unwrap();
        let (s, o) = (g.value(out.density).clone(), g.value(out.offset).clone());
        (s, o)
    };
    let (s1, o1) = eval(&random_dirs(&mut rng, 8));
    let (s2, o2) = eval(&random_dirs(&mut rng, 8));
    assert_eq!(s1, s2);
    assert_ne!(o1, o2, "offsets depend on direction");
}

#[test]
fn view_independent_outputs_ignore_direction() {
    let model = Model::<f64>::new(small_config());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pts = random_points(&mut rng, 8);
    let eval = |dirs: &[Vec3]| {
        let g = Graph::new();
        let x = g.constant(points_tensor(&pts));
        let d = g.constant(points_tensor(dirs));
        let out = model.nerf_field(&g, x, d, true, true).unwrap();
        let r = (
            g.value(out.density_vi).clone(),
            g.value(out.color_vi).clone(),
            g.value(out.density_vd.unwrap()).clone(),
        );
        r
    };
    let a = eval(&random_dirs(&mut rng, 8));
    let b = eval(&random_dirs(&mut rng, 8));
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
    assert_ne!(a.2, b.2);
}

#[test]
fn radiance_outputs_have_declared_ranges_and_widths() {
    let model = Model::<f32>::new(FieldConfig {
        feature_dim: 64,
        ..small_config()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g = Graph::new();
    let x = g.constant(points_tensor(&random_points(&mut rng, 32)));
    let d = g.constant(points_tensor(&random_dirs(&mut rng, 32)));
    let out = model.nerf_field(&g, x, d, false, true).unwrap();
    assert_eq!(g.shape(out.feature_vd.unwrap()), vec![32, 64]);
    for v in [out.density_vi, out.density_vd.unwrap()] {
        assert!(g.value(v).data().iter().all(|&s| s >= 0.0 && s.is_finite()));
    }
    assert!(g.value(out.color_vi).data().iter().all(|&c| (0.0..=1.0).contains(&c)));
    assert!(g.value(out.feature_vd.unwrap()).data().iter().all(|f| f.is_finite()));
}

#[test]
fn non_unit_direction_is_rejected() {
    let model = Model::<f64>::new(small_config());
    let g = Graph::new();
    let x = g.constant(points_tensor(&[Vec3::ZERO]));
    let d = g.constant(points_tensor(&[Vec3::new(0.0, 0.0, 1.1)]));
    assert!(matches!(
        model.glass_field(&g, x, d),
        Err(FieldError::NonUnitDirection { index: 0, .. })
    ));
    assert!(model.nerf_field(&g, x, d, false, true).is_err());
}

#[test]
fn decoder_and_gate_at_zero_features() {
    let mut model = Model::<f64>::new(small_config());
    for head in [model.decoder.clone(), model.gate.clone()] {
        for l in [head.hidden, head.out] {
            model.store.get_mut(l.bias).data_mut().iter_mut().for_each(|b| *b = 0.0);
        }
    }
    let g = Graph::new();
    let f = g.constant(Tensor::zeros(&[2, 8]));
    let (c, a) = model.decode_and_gate(&g, f).unwrap();
    assert!(g.value(c).data().iter().all(|&v| v == 0.5));
    assert!(g.value(a).data().iter().all(|&v| v == 0.5));
}

#[test]
fn decoder_outputs_saturate_in_range() {
    let model = Model::<f64>::new(small_config());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let v: Vec<f64> = (0..3 * 8).map(|_| rng.gen_range(-1e3..1e3)).collect();
    let g = Graph::new();
    let f = g.constant(Tensor::from_f64(&[3, 8], &v).unwrap());
    let (c, a) = model.decode_and_gate(&g, f).unwrap();
    assert!(g.value(c).data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    assert!(g.value(a).data().iter().all(|&v| (0.0..=1.0).contains(&v)));
}

#[test]
fn decoder_width_mismatch() {
    let model = Model::<f64>::new(small_config());
    let g = Graph::new();
    let f = g.constant(Tensor::zeros(&[2, 5]));
    assert!(matches!(
        model.decode_and_gate(&g, f),
        Err(FieldError::FeatureWidth { got: 5, expected: 8 })
    ));
}

#[test]
fn gate_gradient_does_not_reach_decoder() {
    let mut model = Model::<f64>::new(small_config());
    let g = Graph::new();
    let f = g.leaf(Tensor::full(&[2, 8], 0.3));
    let (_c, a) = model.decode_and_gate(&g, f).unwrap();
    let loss = g.sum(a);
    g.backward_into(loss, &mut model.store).unwrap();
    for id in model.params_with_prefix("decoder") {
        assert!(model.store.get(id).grad().is_none());
    }
    for id in model.params_with_prefix("gate") {
        assert!(model.store.get(id).grad().is_some());
    }
}

/// Finite-difference check of a scalar reduction of every field output with
/// respect to all parameters and both input batches.
#[test]
fn field_gradients_match_finite_differences() {
    let cfg = FieldConfig {
        width: 8,
        zero_init_offsets: false,
        ..small_config()
    };
    let mut model = Model::<f64>::new(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pts = points_tensor::<f64>(&random_points(&mut rng, 3));
    let dirs = points_tensor::<f64>(&random_dirs(&mut rng, 3));
    let weights: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let forward = |m: &Model<f64>, g: &Graph<f64>, x: Var| -> Var {
        let d = g.constant(dirs.clone());
        let gl = m.glass_field(g, x, d).unwrap();
        let nf = m.nerf_field(g, x, d, true, true).unwrap();
        let outs = [
            gl.density,
            gl.offset,
            nf.density_vi,
            nf.color_vi,
            nf.density_vd.unwrap(),
            nf.feature_vd.unwrap(),
        ];
        let mut total = g.scalar(0.0);
        for (k, o) in outs.into_iter().enumerate() {
            let w = g.constant(Tensor::full(&g.shape(o), weights[k]));
            total = g.add(total, g.sum(g.mul(o, w).unwrap())).unwrap();
        }
        total
    };

    let g = Graph::new();
    let x = g.leaf(pts.clone());
    let loss = forward(&model, &g, x);
    let grads = g.backward_into(loss, &mut model.store).unwrap();
    let dx = grads.wrt(x).unwrap().clone();

    let value = |m: &Model<f64>, p: &Tensor<f64>| {
        let g = Graph::new();
        let x = g.constant(p.clone());
        let l = forward(m, &g, x);
        let v = g.value(l).item().unwrap();
        v
    };
    let h = 1e-4;
    let close = |a: f64, n: f64| (a - n).abs() <= (1e-4 * a.abs().max(n.abs())).max(1e-6);
    for i in 0..pts.len() {
        let (mut p, mut m) = (pts.clone(), pts.clone());
        p.data_mut()[i] += h;
        m.data_mut()[i] -= h;
        let fd = (value(&model, &p) - value(&model, &m)) / (2.0 * h);
        assert!(close(dx.data()[i], fd), "input {i}: {} vs {fd}", dx.data()[i]);
    }
    let ids: Vec<_> = model.store.ids().collect();
    for id in ids {
        // decoder, gate and the coarse copy are not on this tape
        let Some(analytic) = model.store.get(id).grad().map(<[f64]>::to_vec) else {
            assert!(!model.store.name(id).starts_with("glass") && !model.store.name(id).starts_with("nerf_fine"));
            continue;
        };
        for (i, &grad) in analytic.iter().enumerate() {
            let orig = model.store.get(id).data()[i];
            model.store.get_mut(id).data_mut()[i] = orig + h;
            let up = value(&model, &pts);
            model.store.get_mut(id).data_mut()[i] = orig - h;
            let down = value(&model, &pts);
            model.store.get_mut(id).data_mut()[i] = orig;
            let fd = (up - down) / (2.0 * h);
            assert!(close(grad, fd), "{}[{i}]: {} vs {fd}", model.store.name(id), grad);
        }
    }
}
