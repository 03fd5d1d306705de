use ndarray::array;
use rand_chacha::ChaCha8Rng;

use super::*;

fn random_net(sizes: &[usize], seed: u64) -> Network {
    let mut net = init_uniform(&NetworkSpec::mlp(sizes, 0.0), seed).unwrap();
    // nonzero biases so their gradients are exercised
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb1a5);
    for layer in net.layers.iter_mut() {
        layer.b.mapv_inplace(|_| rng.gen_range(-0.3..0.3));
    }
    net
}

fn random_input(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((n, d), || rng.gen_range(-1.5..1.5))
}

/// Loop-based evaluator with no matrix algebra.
fn loop_forward(net: &Network, x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    for layer in &net.layers {
        let mut next = vec![0.0; layer.n_out()];
        for o in 0..layer.n_out() {
            let mut z = layer.b[o];
            for i in 0..layer.n_in() {
                z += layer.w[(o, i)] * h[i];
            }
            next[o] = match layer.activation {
                Activation::Relu => z.max(0.0),
                Activation::Linear => z,
            };
        }
        h = next;
    }
    h
}

#[test]
fn identity_layer_passes_input_through() {
    let layer = DenseLayer { w: Array2::eye(3), b: Array1::zeros(3), activation: Activation::Linear };
    let net = Network::from_layers(vec![layer], 0.0).unwrap();
    let x = array![[1.0, -2.0, 3.5]];
    assert_eq!(net.forward(x.view()).unwrap(), x);
}

#[test]
fn relu_layer_clips_negatives() {
    let layer = DenseLayer { w: Array2::eye(2), b: Array1::zeros(2), activation: Activation::Relu };
    let net = Network::from_layers(vec![layer], 0.0).unwrap();
    assert_eq!(net.forward(array![[-1.0, 2.0]].view()).unwrap(), array![[0.0, 2.0]]);
}

#[test]
fn forward_matches_loop_evaluator() {
    let net = random_net(&[4, 7, 5, 3], 11);
    let x = random_input(9, 4, 12);
    let out = net.forward(x.view()).unwrap();
    for r in 0..9 {
        let oracle = loop_forward(&net, x.row(r).as_slice().unwrap());
        for (a, b) in out.row(r).iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn forward_rejects_wrong_width() {
    let net = random_net(&[4, 3], 1);
    assert!(matches!(net.forward(random_input(2, 5, 0).view()), Err(Error::Dimension(_))));
    assert!(matches!(Network::from_layers(Vec::new(), 0.0), Err(Error::Config(_))));
}

#[test]
fn linear_layer_gradient_is_outer_product() {
    let mut net = random_net(&[3, 2], 5);
    net.layers[0].activation = Activation::Linear;
    let x = array![[0.5, -1.0, 2.0]];
    net.forward_train::<ChaCha8Rng>(x.view(), None).unwrap();
    let g = net.backward(Array2::ones((1, 2)).view()).unwrap();
    assert_eq!(g.w[0], array![[0.5, -1.0, 2.0], [0.5, -1.0, 2.0]]);
    assert_eq!(g.b[0], array![1.0, 1.0]);
}

#[test]
fn backward_before_forward_is_a_state_error() {
    let net = random_net(&[3, 2], 5);
    assert!(matches!(net.backward(Array2::ones((1, 2)).view()), Err(Error::State(_))));
}

#[test]
fn relu_at_zero_has_zero_subgradient() {
    let layer = DenseLayer { w: array![[1.0]], b: array![0.0], activation: Activation::Relu };
    let mut net = Network::from_layers(vec![layer], 0.0).unwrap();
    net.forward_train::<ChaCha8Rng>(array![[0.0]].view(), None).unwrap();
    let g = net.backward(array![[1.0]].view()).unwrap();
    assert_eq!(g.w[0][(0, 0)], 0.0);
    assert_eq!(g.b[0][0], 0.0);
    assert_eq!(g.input[(0, 0)], 0.0);
}

/// Weighted-sum loss so every output contributes with its own sign.
fn weighted_loss(net: &Network, x: &Array2<f64>, c: &Array2<f64>) -> f64 {
    (&net.forward(x.view()).unwrap() * c).sum()
}

fn check_gradients(sizes: &[usize], seed: u64) {
    let mut net = random_net(sizes, seed);
    let x = random_input(6, sizes[0], seed + 1);
    let c = random_input(6, *sizes.last().unwrap(), seed + 2);
    net.forward_train::<ChaCha8Rng>(x.view(), None).unwrap();
    let g = net.backward(c.view()).unwrap();
    let h = 1e-5;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-5 * a.abs().max(b.abs()) + 1e-7;
    for l in 0..net.layers.len() {
        for idx in 0..net.layers[l].w.len() {
            let (r, col) = (idx / net.layers[l].n_in(), idx % net.layers[l].n_in());
            let mut p = net.clone();
            p.layers[l].w[(r, col)] += h;
            let mut m = net.clone();
            m.layers[l].w[(r, col)] -= h;
            let fd = (weighted_loss(&p, &x, &c) - weighted_loss(&m, &x, &c)) / (2.0 * h);
            assert!(close(g.w[l][(r, col)], fd), "W{l}[{r},{col}] {} vs {fd}", g.w[l][(r, col)]);
        }
        for o in 0..net.layers[l].n_out() {
            let mut p = net.clone();
            p.layers[l].b[o] += h;
            let mut m = net.clone();
            m.layers[l].b[o] -= h;
            let fd = (weighted_loss(&p, &x, &c) - weighted_loss(&m, &x, &c)) / (2.0 * h);
            assert!(close(g.b[l][o], fd), "b{l}[{o}] {} vs {fd}", g.b[l][o]);
        }
    }
    for r in 0..x.nrows() {
        for col in 0..x.ncols() {
            let mut xp = x.clone();
            xp[(r, col)] += h;
            let mut xm = x.clone();
            xm[(r, col)] -= h;
            let fd = (weighted_loss(&net, &xp, &c) - weighted_loss(&net, &xm, &c)) / (2.0 * h);
            assert!(close(g.input[(r, col)], fd));
        }
    }
}

#[test]
fn gradients_match_central_differences() {
    for seed in 0..4 {
        check_gradients(&[3, 2], seed);
        check_gradients(&[4, 6, 3], seed);
        check_gradients(&[5, 8, 7, 6, 5, 2], seed);
    }
}

#[test]
fn dropout_mask_statistics() {
    assert!(dropout_mask(0.0, (3, 4), 1).unwrap().iter().all(|&v| v == 1.0));
    let m = dropout_mask(0.05, (1000, 1000), 7).unwrap();
    let dropped = m.iter().filter(|&&v| v == 0.0).count() as f64 / 1e6;
    assert!((dropped - 0.05).abs() <= 0.002, "drop fraction {dropped}");
    assert!(m.iter().all(|&v| v == 0.0 || (v - 1.0 / 0.95).abs() < 1e-15));
    assert!(dropout_mask(1.0, (1, 1), 0).is_err());
}

#[test]
fn evaluation_ignores_dropout() {
    let mut spec = NetworkSpec::mlp(&[3, 16, 2], 0.5);
    spec.dropout = 0.5;
    let mut net = init_uniform(&spec, 3).unwrap();
    let x = random_input(4, 3, 4);
    let a = net.forward(x.view()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let train = net.forward_train(x.view(), Some(&mut rng)).unwrap();
    assert_ne!(train, a);
    assert_eq!(net.forward(x.view()).unwrap(), a);
}

#[test]
fn init_is_reproducible_and_bounded() {
    let spec = NetworkSpec::mlp(&[200, 500, 1], 0.0);
    let a = init_uniform(&spec, 9).unwrap();
    let b = init_uniform(&spec, 9).unwrap();
    assert_eq!(a, b);
    let w = &a.layers[0].w;
    assert!(w.len() >= 100_000);
    let bound = (6.0f64 / 700.0).sqrt();
    assert!(w.iter().all(|v| v.abs() <= bound));
    let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
    let expected = bound * bound / 3.0;
    assert!((var / expected - 1.0).abs() < 0.05, "variance {var} vs {expected}");
    assert!(a.layers.iter().all(|l| l.b.iter().all(|&v| v == 0.0)));
}

#[test]
fn mae_cases() {
    assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
    assert_eq!(mae(&[1.0, 5.0], &[2.0, 4.0]).unwrap(), 1.0);
    assert!(matches!(mae(&[], &[]), Err(Error::InputDomain(_))));
    assert!(matches!(mae(&[1.0], &[]), Err(Error::Dimension(_))));
}

#[test]
fn adam_zero_gradient_leaves_parameters() {
    let mut adam = Adam::default();
    let mut p = vec![1.0, -2.0];
    for _ in 0..5 {
        adam.update(&mut [&mut p[..]], &[&[0.0, 0.0][..]]).unwrap();
    }
    assert_eq!(p, vec![1.0, -2.0]);
}

#[test]
fn adam_constant_gradient_moves_by_learning_rate() {
    let mut adam = Adam::new(1e-3);
    let mut p = vec![0.0, 0.0];
    let mut last = p.clone();
    for _ in 0..200 {
        adam.update(&mut [&mut p[..]], &[&[3.0, -0.2][..]]).unwrap();
        let step = [p[0] - last[0], p[1] - last[1]];
        assert!(step[0] < 0.0 && step[1] > 0.0);
        assert!((step[0].abs() - 1e-3).abs() < 1e-6 && (step[1].abs() - 1e-3).abs() < 1e-6);
        last = p.clone();
    }
}

#[test]
fn adam_descends_a_quadratic_bowl() {
    let mut adam = Adam::new(0.05);
    let mut p = vec![1.0, -0.7, 0.4];
    let loss = |p: &[f64]| p[0] * p[0] + 3.0 * p[1] * p[1] + 0.5 * p[2] * p[2];
    let mut history = vec![loss(&p)];
    for _ in 0..10 {
        let g = vec![2.0 * p[0], 6.0 * p[1], p[2]];
        adam.update(&mut [&mut p[..]], &[&g[..]]).unwrap();
        history.push(loss(&p));
    }
    for w in history[2..].windows(2) {
        assert!(w[1] < w[0], "{history:?}");
    }
}

#[test]
fn early_stopping_waits_for_patience() {
    let mut es = EarlyStopping::new(2);
    assert!(es.observe(0, 1.0));
    assert!(!es.observe(1, 1.5));
    assert!(!es.should_stop());
    assert!(!es.observe(2, 1.0));
    assert!(es.should_stop());
    assert_eq!(es.best_epoch, Some(0));
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.bin");
    let net = random_net(&[4, 6, 2], 21);
    net.save(&path, 21).unwrap();
    let (back, seed) = Network::load(&path).unwrap();
    assert_eq!(seed, 21);
    assert_eq!(back, net);
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..8], MAGIC);
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(matches!(Network::load(&path), Err(Error::Checkpoint(_))));
    assert!(matches!(Network::load(dir.path().join("none")), Err(Error::MissingArtifact(_))));
}
