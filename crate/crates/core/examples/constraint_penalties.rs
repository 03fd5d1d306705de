//! The three soft constraints on the linear encoder.
//!
//! UN pushes every column of `W` to unit norm, WO pushes distinct columns to
//! be orthogonal, and AR discourages correlated progress variables. Each
//! penalty is zero on its ideal case and grows as `W` is perturbed away.
//!
//! ```bash
//! cargo run --release --example constraint_penalties
//! ```

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use chemtab::chemtab_model::{
    concat_zmix, covariance, embed, penalty_ar, penalty_un, penalty_un_grad, penalty_wo, random_orthonormal,
};

fn main() -> chemtab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let w0 = random_orthonormal(8, 3, 4);
    println!("  eps     UN          WO");
    for eps in [0.0, 1e-3, 1e-2, 1e-1] {
        let w = &w0 + &Array2::from_shape_fn((8, 3), |_| eps * rng.gen_range(-1.0..1.0));
        println!("  {eps:<6}  {:.3e}  {:.3e}", penalty_un(w.view()), penalty_wo(w.view()));
    }

    // Descending the UN gradient restores unit column norms.
    let mut w = w0.mapv(|v| 1.7 * v);
    for _ in 0..200 {
        w = &w - &(penalty_un_grad(w.view()) * 0.05);
    }
    let norms: Vec<String> = w.columns().into_iter().map(|c| format!("{:.4}", c.dot(&c).sqrt())).collect();
    println!("column norms after 200 UN steps: {}", norms.join(", "));

    // AR acts on the PV batch [Z, Y W]. Correlated columns are penalized.
    let y = Array2::from_shape_fn((500, 8), |_| rng.gen_range(0.0..1.0));
    let z = Array1::from_shape_fn(500, |_| rng.gen_range(0.0..1.0));
    let pv = concat_zmix(embed(y.view(), w0.view())?.view(), z.view())?;
    println!("AR on random PVs: {:.3e}", penalty_ar(pv.view())?);
    let mut tied = pv.clone();
    let mixed = &tied.column(1) * 0.9 + &tied.column(2) * 0.1;
    tied.column_mut(2).assign(&mixed);
    println!("AR with two nearly equal PVs: {:.3e}", penalty_ar(tied.view())?);
    println!("covariance of the tied batch:\n{:.4}", covariance(tied.view())?);
    Ok(())
}
