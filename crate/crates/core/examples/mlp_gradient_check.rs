//! Dense network, reverse-mode gradients and Adam.
//!
//! First compares backpropagated gradients of a small ReLU network with
//! central finite differences, then fits `sin(3x)` on [-1, 1] with Adam and
//! reports the MAE as training proceeds.
//!
//! ```bash
//! cargo run --release --example mlp_gradient_check
//! ```

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use chemtab::nn::{init_uniform, mae, Adam, Network, NetworkSpec};

/// Half the summed squared output, so the upstream gradient is `out - target`.
fn half_sse(net: &Network, x: &Array2<f64>, target: &Array2<f64>) -> f64 {
    let out = net.forward(x.view()).expect("shapes match");
    0.5 * (&out - target).mapv(|v| v * v).sum()
}

fn gradient_check() -> chemtab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spec = NetworkSpec::mlp(&[3, 6, 5, 2], 0.0);
    let mut net = init_uniform(&spec, 9)?;
    let x = Array2::from_shape_fn((7, 3), |_| rng.gen_range(-1.0..1.0));
    let target = Array2::from_shape_fn((7, 2), |_| rng.gen_range(-1.0..1.0));

    let out = net.forward_train::<ChaCha8Rng>(x.view(), None)?;
    let grads = net.backward((&out - &target).view())?;
    let analytic: Vec<f64> = grads.blocks().iter().flat_map(|b| b.iter().copied()).collect();

    let h = 1e-6;
    let mut worst = 0.0f64;
    let mut k = 0;
    for block in 0..net.param_blocks_mut().len() {
        for i in 0..net.param_blocks_mut()[block].len() {
            let orig = net.param_blocks_mut()[block][i];
            net.param_blocks_mut()[block][i] = orig + h;
            let up = half_sse(&net, &x, &target);
            net.param_blocks_mut()[block][i] = orig - h;
            let down = half_sse(&net, &x, &target);
            net.param_blocks_mut()[block][i] = orig;
            let fd = (up - down) / (2.0 * h);
            worst = worst.max((analytic[k] - fd).abs() / analytic[k].abs().max(fd.abs()).max(1e-2));
            k += 1;
        }
    }
    println!("{} parameters, worst relative gradient error {worst:.2e}", net.n_params());
    Ok(())
}

fn fit_sine() -> chemtab::Result<()> {
    let n = 256;
    let x = Array2::from_shape_fn((n, 1), |(i, _)| -1.0 + 2.0 * i as f64 / (n - 1) as f64);
    let y = x.mapv(|v| (3.0 * v).sin());
    let mut net = init_uniform(&NetworkSpec::mlp(&[1, 32, 32, 1], 0.0), 1)?;
    let mut adam = Adam::new(3e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..=400 {
        for i in (1..n).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        for chunk in order.chunks(32) {
            let xb = x.select(Axis(0), chunk);
            let yb = y.select(Axis(0), chunk);
            let out = net.forward_train::<ChaCha8Rng>(xb.view(), None)?;
            // Mean squared error gradient.
            let upstream = (&out - &yb) * (2.0 / chunk.len() as f64);
            let grads = net.backward(upstream.view())?;
            adam.update(&mut net.param_blocks_mut(), &grads.blocks())?;
        }
        if epoch % 100 == 0 {
            let pred = net.forward(x.view())?;
            let err = mae(pred.as_slice().expect("contiguous"), y.as_slice().expect("contiguous"))?;
            println!("epoch {epoch:>3}: MAE {err:.4}");
        }
    }
    Ok(())
}

fn main() -> chemtab::Result<()> {
    gradient_check()?;
    fit_sine()
}
