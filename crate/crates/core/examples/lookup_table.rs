//! Multilinear lookup tables.
//!
//! A table built from nodes reproduces any affine function exactly, and a
//! table built from scattered samples bins them onto a regular grid. The
//! last part tabulates source energy over `(Z_mix, C_pv)` for a short sweep,
//! which is the LOOKUP baseline.
//!
//! ```bash
//! cargo run --release --example lookup_table
//! ```

use ndarray::{arr1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use chemtab::baselines::{FgmWeights, LookupBaseline, LookupTable};
use chemtab::dataset::{split, SplitMode, SplitSpec};
use chemtab::eval::evaluate;
use chemtab::flamelet::{assemble_dataset, strain_sweep, BoundaryConditions, Grid, SolverOptions, SweepOptions};
use chemtab::Mechanism;

fn affine(a: f64, b: f64) -> f64 {
    0.5 + 2.0 * a - 3.0 * b
}

fn main() -> chemtab::Result<()> {
    let ax = vec![0.0, 0.1, 0.4, 1.0];
    let bx = vec![-1.0, 0.0, 2.0];
    // Nodes are listed with the last axis varying fastest.
    let mut values = Array2::zeros((ax.len() * bx.len(), 1));
    for (i, &a) in ax.iter().enumerate() {
        for (j, &b) in bx.iter().enumerate() {
            values[(i * bx.len() + j, 0)] = affine(a, b);
        }
    }
    let table = LookupTable::from_nodes(vec![ax, bx], values)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let worst = (0..1000)
        .map(|_| {
            let (a, b) = (rng.gen_range(0.0..1.0), rng.gen_range(-1.0..2.0));
            (table.lookup(arr1(&[a, b]).view()).expect("2-d query")[0] - affine(a, b)).abs()
        })
        .fold(0.0, f64::max);
    println!("affine reproduction, worst error over 1000 queries: {worst:.1e}");
    println!("query outside the grid is clamped: {:?}", table.lookup(arr1(&[5.0, 5.0]).view())?);

    let mech = Mechanism::default_methane();
    let bc = BoundaryConditions::from_mechanism(&mech);
    let sweep = SweepOptions { n_flames: 12, shrink: 0.97 };
    let flames = strain_sweep(&mech, &bc, &sweep, &Grid::new(200, 0.02)?, &SolverOptions::default())?;
    let (ds, _) = assemble_dataset(&flames)?;
    let (train, test) = split(&ds, &SplitSpec::new(SplitMode::ByPoint, 0.8, 3)?)?;
    let keys = vec!["CO".to_string(), "OH".to_string()];
    for sizes in [[20, 10], [50, 25], [200, 100]] {
        let lookup = LookupBaseline::fit(&train, &FgmWeights::default(), &keys, &sizes)?;
        let report = evaluate(&lookup, &test)?;
        println!(
            "(Z, C_pv) table {}x{}: energy MAE {:.4e}, {}",
            sizes[0],
            sizes[1],
            report.mae_source_energy,
            report.mae_key.iter().map(|(k, v)| format!("{k} {v:.3e}")).collect::<Vec<_>>().join(", ")
        );
    }
    println!("C_pv = {}", FgmWeights::default().describe());
    Ok(())
}
