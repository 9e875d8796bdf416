use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn t(shape: &[usize], v: &[f64]) -> Tensor<f64> {
    Tensor::from_f64(shape, v).unwrap()
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
    t(shape, &v)
}

/// Reduces `v` to a scalar with fixed pseudo-random weights so every output
/// element contributes a distinct sensitivity.
fn weighted_sum(g: &Graph<f64>, v: Var) -> Var {
    let shape = g.shape(v);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let w = g.constant(random_tensor(&mut rng, &shape, -1.0, 1.0));
    let p = g.mul(v, w).unwrap();
    g.sum(p)
}

fn close(a: f64, n: f64) -> bool {
    (a - n).abs() <= (1e-4 * a.abs().max(n.abs())).max(1e-6)
}

/// Central finite differences (step 1e-4) against the tape gradient for
/// every element of every input.
fn check_grad(inputs: &[Tensor<f64>], f: impl Fn(&Graph<f64>, &[Var]) -> Var) {
    let g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|x| g.leaf(x.clone())).collect();
    let loss = f(&g, &vars);
    let grads = g.backward(loss).unwrap();
    let eval = |xs: &[Tensor<f64>]| {
        let g = Graph::new();
        let vars: Vec<Var> = xs.iter().map(|x| g.constant(x.clone())).collect();
        let l = f(&g, &vars);
        let v = g.value(l).item().unwrap();
        v
    };
    let h = 1e-4;
    for (k, x) in inputs.iter().enumerate() {
        let analytic = grads.wrt(vars[k]).expect("leaf reachable");
        for i in 0..x.len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[i] += h;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[i] -= h;
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let a = analytic.data()[i];
            assert!(close(a, fd), "input {k} element {i}: analytic {a} vs fd {fd}");
        }
    }
}

#[test]
fn forward_examples() {
    let g = Graph::<f64>::new();
    let z = g.constant(t(&[1], &[0.0]));
    assert_eq!(g.value(g.exp(z)).data(), &[1.0]);
    assert_eq!(g.value(g.sigmoid(z)).data(), &[0.5]);
    let c = g.constant(t(&[3], &[1.0, 2.0, 3.0]));
    let cs = g.cumsum(c, 0, false).unwrap();
    assert_eq!(g.value(cs).data(), &[1.0, 3.0, 6.0]);
    let ex = g.cumsum(c, 0, true).unwrap();
    assert_eq!(g.value(ex).data(), &[0.0, 1.0, 3.0]);
}

#[test]
fn shape_mismatch_names_both_shapes() {
    let g = Graph::<f64>::new();
    let a = g.constant(Tensor::zeros(&[2, 3]));
    let b = g.constant(Tensor::zeros(&[4, 5]));
    let err = g.matmul(a, b).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("[2, 3]") && msg.contains("[4, 5]"), "{msg}");
    let err = g.add(a, b).unwrap_err();
    assert!(matches!(err, AutodiffError::ShapeMismatch { op: "add", .. }));
}

#[test]
fn broadcasting_rows_and_columns() {
    let g = Graph::<f64>::new();
    let m = g.constant(t(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
    let row = g.constant(t(&[1, 3], &[10.0, 20.0, 30.0]));
    let col = g.constant(t(&[2, 1], &[2.0, 3.0]));
    assert_eq!(
        g.value(g.add(m, row).unwrap()).data(),
        &[11.0, 22.0, 33.0, 14.0, 25.0, 36.0]
    );
    assert_eq!(
        g.value(g.mul(m, col).unwrap()).data(),
        &[2.0, 4.0, 6.0, 12.0, 15.0, 18.0]
    );
    let b = g.broadcast_to(row, &[2, 3]).unwrap();
    assert_eq!(g.value(b).data(), &[10.0, 20.0, 30.0, 10.0, 20.0, 30.0]);
}

#[test]
fn quadratic_and_sigmoid_gradients() {
    let g = Graph::<f64>::new();
    let w = g.leaf(t(&[2], &[1.0, 2.0]));
    let sq = g.mul(w, w).unwrap();
    let loss = g.sum(sq);
    let grads = g.backward(loss).unwrap();
    assert_eq!(grads.wrt(w).unwrap().data(), &[2.0, 4.0]);

    let g = Graph::<f64>::new();
    let x = g.leaf(Tensor::scalar(0.0));
    let s = g.sigmoid(x);
    let grads = g.backward(s).unwrap();
    assert_eq!(grads.wrt(x).unwrap().data(), &[0.25]);
}

#[test]
fn non_scalar_loss_is_rejected() {
    let g = Graph::<f64>::new();
    let w = g.leaf(t(&[2], &[1.0, 2.0]));
    assert!(matches!(g.backward(w), Err(AutodiffError::NonScalarLoss(_))));
}

#[test]
fn grads_accumulate_until_zeroed() {
    let mut store = ParamStore::<f64>::new();
    let id = store.add("w", t(&[2], &[1.0, -1.0]));
    for _ in 0..2 {
        let g = Graph::new();
        let w = g.param(&store, id);
        let sq = g.mul(w, w).unwrap();
        let loss = g.sum(sq);
        g.backward_into(loss, &mut store).unwrap();
    }
    assert_eq!(store.get(id).grad().unwrap(), &[4.0, -4.0]);
    store.zero_grad();
    assert_eq!(store.get(id).grad().unwrap(), &[0.0, 0.0]);
}

#[test]
fn param_reuse_sums_contributions() {
    let mut store = ParamStore::<f64>::new();
    let id = store.add("w", t(&[1], &[3.0]));
    let g = Graph::new();
    let a = g.param(&store, id);
    let b = g.param(&store, id);
    assert_eq!(a, b);
    let loss = g.add(a, b).unwrap();
    let loss = g.sum(loss);
    g.backward_into(loss, &mut store).unwrap();
    assert_eq!(store.get(id).grad().unwrap(), &[2.0]);
}

#[test]
fn unary_ops_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random_tensor(&mut rng, &[3, 4], -2.0, 2.0);
    // keep relu inputs away from the kink
    let xr = t(&[6], &[-1.3, -0.4, 0.2, 0.7, 1.1, -2.0]);
    let pos = random_tensor(&mut rng, &[5], 0.5, 3.0);
    for op in 0..8 {
        check_grad(std::slice::from_ref(&x), |g, v| {
            let y = match op {
                0 => g.exp(v[0]),
                1 => g.sin(v[0]),
                2 => g.cos(v[0]),
                3 => g.sigmoid(v[0]),
                4 => g.softplus(v[0]),
                5 => g.tanh(v[0]),
                6 => g.neg(v[0]),
                _ => g.scale(g.shift(v[0], 0.3), -1.7),
            };
            weighted_sum(g, y)
        });
    }
    check_grad(&[xr], |g, v| weighted_sum(g, g.relu(v[0])));
    check_grad(&[pos], |g, v| weighted_sum(g, g.sqrt(v[0])));
}

#[test]
fn structural_ops_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = random_tensor(&mut rng, &[2, 3, 4], -1.0, 1.0);
    let b = random_tensor(&mut rng, &[2, 2, 4], -1.0, 1.0);
    for axis in 0..3 {
        check_grad(std::slice::from_ref(&a), |g, v| {
            weighted_sum(g, g.sum_axis(v[0], axis).unwrap())
        });
        for exclusive in [false, true] {
            check_grad(std::slice::from_ref(&a), |g, v| {
                weighted_sum(g, g.cumsum(v[0], axis, exclusive).unwrap())
            });
        }
    }
    check_grad(&[a.clone(), b], |g, v| weighted_sum(g, g.concat(v, 1).unwrap()));
    check_grad(std::slice::from_ref(&a), |g, v| {
        weighted_sum(g, g.slice(v[0], 2, 1, 2).unwrap())
    });
    check_grad(std::slice::from_ref(&a), |g, v| {
        weighted_sum(g, g.reshape(v[0], &[6, 4]).unwrap())
    });
    check_grad(std::slice::from_ref(&a), |g, v| g.mean(v[0]));
    let row = random_tensor(&mut rng, &[1, 4], -1.0, 1.0);
    check_grad(&[row], |g, v| weighted_sum(g, g.broadcast_to(v[0], &[3, 4]).unwrap()));
}

#[test]
fn binary_ops_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_tensor(&mut rng, &[3, 4], -1.0, 1.0);
    let b = random_tensor(&mut rng, &[3, 4], 0.5, 2.0);
    let row = random_tensor(&mut rng, &[1, 4], 0.5, 2.0);
    let col = random_tensor(&mut rng, &[3, 1], 0.5, 2.0);
    for rhs in [&b, &row, &col] {
        for op in 0..4 {
            check_grad(&[a.clone(), rhs.clone()], |g, v| {
                let y = match op {
                    0 => g.add(v[0], v[1]),
                    1 => g.sub(v[0], v[1]),
                    2 => g.mul(v[0], v[1]),
                    _ => g.div(v[0], v[1]),
                }
                .unwrap();
                weighted_sum(g, y)
            });
        }
    }
    let m = random_tensor(&mut rng, &[4, 5], -1.0, 1.0);
    check_grad(&[a, m], |g, v| weighted_sum(g, g.matmul(v[0], v[1]).unwrap()));
}

#[test]
fn random_three_layer_network_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random_tensor(&mut rng, &[5, 4], -1.0, 1.0);
    let params: Vec<Tensor<f64>> = [[4, 8], [1, 8], [8, 8], [1, 8], [8, 2], [1, 2]]
        .iter()
        .map(|s| random_tensor(&mut rng, s, -0.8, 0.8))
        .collect();
    check_grad(&params, |g, p| {
        let xi = g.constant(x.clone());
        let h = g.tanh(g.linear(xi, p[0], p[1]).unwrap());
        let h = g.softplus(g.linear(h, p[2], p[3]).unwrap());
        let y = g.sigmoid(g.linear(h, p[4], p[5]).unwrap());
        weighted_sum(g, y)
    });
}

#[test]
fn backward_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_tensor(&mut rng, &[16, 6], -1.0, 1.0);
    let w = random_tensor(&mut rng, &[6, 6], -1.0, 1.0);
    let run = || {
        let g = Graph::new();
        let wv = g.leaf(w.clone());
        let xv = g.constant(x.clone());
        let y = g.relu(g.matmul(xv, wv).unwrap());
        let y = g.cumsum(y, 0, false).unwrap();
        let l = g.sum(y);
        g.backward(l).unwrap().wrt(wv).unwrap().clone()
    };
    let (a, b) = (run(), run());
    assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn adam_zero_gradient_leaves_parameters() {
    let mut store = ParamStore::<f64>::new();
    let id = store.add("p", t(&[3], &[1.0, -2.0, 0.5]));
    store.zero_grad();
    let mut opt = OptimizerState::new(&store, AdamConfig::default(), LrSchedule::default());
    opt.update(&mut store, &[id], 0.1).unwrap();
    assert_eq!(store.get(id).data(), &[1.0, -2.0, 0.5]);
    assert_eq!(opt.step(), 1);
}

#[test]
fn adam_descends_and_reports_missing_grads() {
    let mut store = ParamStore::<f64>::new();
    let id = store.add("p", t(&[1], &[1.0]));
    let mut opt = OptimizerState::new(&store, AdamConfig::default(), LrSchedule::default());
    assert!(matches!(
        opt.update(&mut store, &[id], 0.1),
        Err(AutodiffError::MissingGradient(_))
    ));
    assert_eq!(opt.step(), 0);
    store.get_mut(id).zero_grad();
    store.get_mut(id).accumulate_grad(&[1.0]);
    opt.update(&mut store, &[id], 0.1).unwrap();
    assert!(store.get(id).data()[0] < 1.0);
    assert_eq!(store.get(id).grad().unwrap(), &[1.0], "grads untouched");
    let (m, v) = opt.moments(id);
    assert_eq!((m.len(), v.len()), (1, 1));
}

#[test]
fn adam_converges_on_quadratic() {
    let mut store = ParamStore::<f64>::new();
    let id = store.add("p", t(&[1], &[0.0]));
    let mut opt = OptimizerState::new(&store, AdamConfig::default(), LrSchedule::default());
    for step in 0..500 {
        store.zero_grad();
        let g = Graph::new();
        let p = g.param(&store, id);
        let d = g.shift(p, -3.0);
        let l = g.sum(g.mul(d, d).unwrap());
        g.backward_into(l, &mut store).unwrap();
        opt.update(&mut store, &[id], 0.05).unwrap();
        assert_eq!(opt.step(), step + 1);
    }
    let p = store.get(id).data()[0];
    assert!((p - 3.0).abs() < 1e-2, "p = {p}");
}

#[test]
fn lr_schedule_decays_exponentially() {
    let s = LrSchedule {
        initial: 5e-4,
        final_lr: 5e-5,
        decay_steps: 1000,
    };
    assert!((s.at(0) - 5e-4).abs() < 1e-15);
    assert!((s.at(500) - 5e-4 * 0.1f64.sqrt()).abs() < 1e-12);
    assert!((s.at(1000) - 5e-5).abs() < 1e-15);
    assert!((s.at(5000) - 5e-5).abs() < 1e-15);
}

proptest! {
    #[test]
    fn inclusive_cumsum_last_equals_sum(v in proptest::collection::vec(-10.0f64..10.0, 1..20)) {
        let g = Graph::<f64>::new();
        let x = g.constant(Tensor::new(&[v.len()], v.clone()).unwrap());
        let c = g.cumsum(x, 0, false).unwrap();
        let s = g.sum(x);
        let last = *g.value(c).data().last().unwrap();
        prop_assert!((last - g.value(s).item().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn matmul_gradient_matches_finite_differences(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_tensor(&mut rng, &[2, 3], -1.0, 1.0);
        let b = random_tensor(&mut rng, &[3, 2], -1.0, 1.0);
        check_grad(&[a, b], |g, v| {
            let y = g.matmul(v[0], v[1]).unwrap();
            weighted_sum(g, g.exp(y))
        });
    }
}
