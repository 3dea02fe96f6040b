use super::*;
use ndarray::{array, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Largest relative error between the analytic gradient `grads` of `loss` and central finite
/// differences, over the parameters with flat index in `which` (all when `None`).
pub(crate) fn max_fd_error(net: &Mlp, grads: &Gradients, loss: impl Fn(&Mlp) -> f64, which: Option<&[usize]>) -> f64 {
    let h = 1e-5;
    let analytic: Vec<f64> = grads.iter().copied().collect();
    let all: Vec<usize> = (0..net.num_params()).collect();
    let idx = which.unwrap_or(&all);
    let mut worst: f64 = 0.0;
    let mut probe = net.clone();
    for &k in idx {
        let orig = *probe.params().nth(k).unwrap();
        *probe.params_mut().nth(k).unwrap() = orig + h;
        let up = loss(&probe);
        *probe.params_mut().nth(k).unwrap() = orig - h;
        let down = loss(&probe);
        *probe.params_mut().nth(k).unwrap() = orig;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[k];
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

fn random_batch(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

#[test]
fn zero_network_outputs_zero() {
    let mut net = Mlp::new(&[3, 5, 2], OutputActivation::Identity, &mut ChaCha8Rng::seed_from_u64(0));
    net.params_mut().for_each(|p| *p = 0.0);
    let y = net.predict(array![[1.0, -2.0, 0.5]].view()).unwrap();
    assert!(y.iter().all(|&v| v == 0.0));
}

#[test]
fn single_layer_is_affine() {
    let mut net = Mlp::new(&[2, 3], OutputActivation::Identity, &mut ChaCha8Rng::seed_from_u64(0));
    net.weights[0] = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
    net.biases[0] = array![0.5, -0.5, 1.0];
    let y = net.predict(array![[1.0, 2.0]].view()).unwrap();
    // x·W + b by hand.
    assert_eq!(y, array![[9.5, 11.5, 16.0]]);
}

#[test]
fn tanh_head_is_bounded() {
    let net = Mlp::new(&[4, 16, 3], OutputActivation::Tanh, &mut ChaCha8Rng::seed_from_u64(1));
    let x = random_batch(&mut ChaCha8Rng::seed_from_u64(2), 50, 4) * 100.0;
    assert!(net.predict(x.view()).unwrap().iter().all(|v| v.abs() <= 1.0));
}

#[test]
fn softmax_head_sums_to_one() {
    let net = Mlp::new(&[4, 8, 5], OutputActivation::Softmax, &mut ChaCha8Rng::seed_from_u64(1));
    let x = random_batch(&mut ChaCha8Rng::seed_from_u64(2), 10, 4);
    for row in net.predict(x.view()).unwrap().rows() {
        assert!((row.sum() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn wrong_width_is_rejected() {
    let net = Mlp::new(&[4, 8, 5], OutputActivation::Identity, &mut ChaCha8Rng::seed_from_u64(1));
    assert_eq!(net.forward(Array2::zeros((2, 3)).view()).unwrap_err(), NeuralError::Dimension { expected: 4, got: 3 });
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for output in [OutputActivation::Identity, OutputActivation::Tanh, OutputActivation::Softmax] {
        let net = Mlp::new(&[5, 7, 6, 3], output, &mut rng);
        let x = random_batch(&mut rng, 4, 5);
        let target = random_batch(&mut rng, 4, 3);
        let loss = |n: &Mlp| mse(n.predict(x.view()).unwrap().view(), target.view()).0;
        let cache = net.forward(x.view()).unwrap();
        let (_, g) = mse(cache.output().view(), target.view());
        let (grads, _) = net.backward(&cache, g.view());
        assert!(max_fd_error(&net, &grads, loss, None) < 1e-4, "{output:?}");
    }
}

#[test]
fn input_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let net = Mlp::new(&[3, 8, 2], OutputActivation::Tanh, &mut rng);
    let x = random_batch(&mut rng, 2, 3);
    let w = random_batch(&mut rng, 2, 2);
    let f = |x: &Array2<f64>| (&net.predict(x.view()).unwrap() * &w).sum();
    let cache = net.forward(x.view()).unwrap();
    let (_, dx) = net.backward(&cache, w.view());
    let h = 1e-6;
    for i in 0..2 {
        for j in 0..3 {
            let mut up = x.clone();
            up[[i, j]] += h;
            let mut down = x.clone();
            down[[i, j]] -= h;
            let numeric = (f(&up) - f(&down)) / (2.0 * h);
            assert!((numeric - dx[[i, j]]).abs() < 1e-8);
        }
    }
}

#[test]
fn zero_output_gradient_gives_zero_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let net = Mlp::new(&[3, 8, 2], OutputActivation::Identity, &mut rng);
    let x = random_batch(&mut rng, 4, 3);
    let cache = net.forward(x.view()).unwrap();
    let (g, dx) = net.backward(&cache, Array2::zeros((4, 2)).view());
    assert!(g.iter().all(|&v| v == 0.0));
    assert!(dx.iter().all(|&v| v == 0.0));
}

#[test]
fn linear_input_gradient_is_transpose_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let net = Mlp::new(&[3, 2], OutputActivation::Identity, &mut rng);
    let x = random_batch(&mut rng, 1, 3);
    let gy = array![[0.3, -1.2]];
    let cache = net.forward(x.view()).unwrap();
    let (_, dx) = net.backward(&cache, gy.view());
    let expected = gy.dot(&net.weights[0].t());
    assert!((&dx - &expected).iter().all(|v| v.abs() < 1e-15));
}

#[test]
fn huber_examples() {
    let (l, g) = huber(array![[0.5]].view(), array![[0.0]].view(), 1.0);
    assert_eq!(l, 0.125);
    assert_eq!(g[[0, 0]], 0.5);
    let (l, g) = huber(array![[3.0]].view(), array![[0.0]].view(), 1.0);
    assert_eq!(l, 2.5);
    assert_eq!(g[[0, 0]], 1.0);
    let (_, inside) = huber(array![[1.0 - 1e-12]].view(), array![[0.0]].view(), 1.0);
    let (_, outside) = huber(array![[1.0 + 1e-12]].view(), array![[0.0]].view(), 1.0);
    assert!((inside[[0, 0]] - outside[[0, 0]]).abs() < 1e-11);
}

#[test]
fn mse_examples() {
    let p = array![[1.0, 2.0], [3.0, 4.0]];
    assert_eq!(mse(p.view(), p.view()).0, 0.0);
    let t = &p - 2.0;
    let (l, g) = mse(p.view(), t.view());
    assert_eq!(l, 4.0);
    assert!(g.iter().all(|&v| v == 2.0 * 2.0 / 4.0));
    let (l, g) = mse_masked(p.view(), t.view(), Some(&[1.0, 0.0]));
    assert_eq!(l, 4.0);
    assert_eq!(g[[1, 0]], 0.0);
    assert_eq!(g[[0, 0]], 2.0);
}

#[test]
fn adam_zero_grad_and_zero_lr() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut net = Mlp::new(&[3, 4, 2], OutputActivation::Identity, &mut rng);
    let before = net.clone();
    let mut st = AdamState::new(&net, 1e-3);
    let zero = Gradients::zeros_like(&net);
    adam_step(&mut net, &zero, &mut st);
    assert_eq!(net, before);
    assert_eq!(st.step, 1);
    let mut g = Gradients::zeros_like(&net);
    g.weights[0].fill(0.7);
    let mut st = AdamState::new(&net, 0.0);
    adam_step(&mut net, &g, &mut st);
    assert_eq!(net, before);
}

#[test]
fn adam_constant_gradient_steps_by_lr() {
    // With a constant gradient g the bias-corrected moments are exactly g and g², so every step
    // moves each parameter by lr·g/(|g| + eps).
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut net = Mlp::new(&[1, 1], OutputActivation::Identity, &mut rng);
    let mut g = Gradients::zeros_like(&net);
    g.weights[0].fill(0.25);
    g.biases[0].fill(-4.0);
    let mut st = AdamState::new(&net, 0.01);
    for _ in 0..50 {
        let (w0, b0) = (net.weights[0][[0, 0]], net.biases[0][0]);
        adam_step(&mut net, &g, &mut st);
        let dw = w0 - net.weights[0][[0, 0]];
        let db = net.biases[0][0] - b0;
        assert!((dw - 0.01 * 0.25 / (0.25 + 1e-8)).abs() < 1e-15);
        assert!((db - 0.01 * 4.0 / (4.0 + 1e-8)).abs() < 1e-15);
    }
}

#[test]
fn soft_update_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let online = Mlp::new(&[3, 4, 2], OutputActivation::Identity, &mut rng);
    let start = Mlp::new(&[3, 4, 2], OutputActivation::Identity, &mut rng);
    let mut t = start.clone();
    soft_update(&mut t, &online, 0.0);
    assert_eq!(t, start);
    soft_update(&mut t, &online, 1.0);
    assert_eq!(t, online);
    let mut t = start.clone();
    let gap = |a: &Mlp| a.params().zip(online.params()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let g0 = gap(&t);
    for s in 1..=20 {
        soft_update(&mut t, &online, 0.1);
        assert!((gap(&t) - g0 * 0.9f64.powi(s)).abs() < 1e-12);
    }
}

#[test]
fn seeded_init_is_deterministic() {
    let a = Mlp::new(&[6, 16, 16, 2], OutputActivation::Tanh, &mut ChaCha8Rng::seed_from_u64(3));
    let b = Mlp::new(&[6, 16, 16, 2], OutputActivation::Tanh, &mut ChaCha8Rng::seed_from_u64(3));
    assert_eq!(a, b);
    let bound = (1.0f64 / 6.0).sqrt();
    assert!(a.weights[0].iter().all(|w| w.abs() <= bound));
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.json");
    let net = Mlp::new(&[3, 4, 2], OutputActivation::Tanh, &mut ChaCha8Rng::seed_from_u64(1));
    let mut ck = Checkpoint::new();
    ck.insert("actor_0", &net);
    save_checkpoint(&path, &ck).unwrap();
    let mut back = load_checkpoint(&path).unwrap();
    assert_eq!(back.take("actor_0").unwrap(), net);
    assert!(back.take("actor_0").is_err());

    let mut bad = ck.clone();
    bad.version = "other/9".into();
    save_checkpoint(&path, &bad).unwrap();
    assert!(load_checkpoint(&path).is_err());
}
