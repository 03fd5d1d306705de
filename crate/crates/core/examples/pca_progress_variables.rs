//! PCA directions on flamelet mass fractions.
//!
//! Fits the principal directions of RMS-scaled mass fractions, prints the
//! variance captured by each and the reconstruction error when keeping the
//! leading `p`. These frozen directions are what the PCA_PVG baseline uses
//! in place of a learned `W`.
//!
//! ```bash
//! cargo run --release --example pca_progress_variables
//! ```

use ndarray::Axis;

use chemtab::baselines::pca_fit;
use chemtab::flamelet::{assemble_dataset, strain_sweep, BoundaryConditions, Grid, SolverOptions, SweepOptions};
use chemtab::Mechanism;

fn main() -> chemtab::Result<()> {
    let mech = Mechanism::default_methane();
    let bc = BoundaryConditions::from_mechanism(&mech);
    let sweep = SweepOptions { n_flames: 10, shrink: 0.97 };
    let flames = strain_sweep(&mech, &bc, &sweep, &Grid::new(200, 0.02)?, &SolverOptions::default())?;
    let (ds, _) = assemble_dataset(&flames)?;

    let rms = ds.y().mapv(|v| v * v).mean_axis(Axis(0)).expect("rows").mapv(f64::sqrt);
    let scaled = ds.y() / &rms;
    let s = ds.n_species();
    let full = pca_fit(scaled.view(), s)?;
    println!("{} rows, {s} species", ds.n_rows());
    for (k, share) in full.explained_variance.iter().enumerate() {
        println!("  pc{}: {:>7.3}% of variance", k + 1, 100.0 * share);
    }
    for p in 1..=s {
        let basis = pca_fit(scaled.view(), p)?;
        println!("  p = {p}: reconstruction error {:.3e}", basis.reconstruction_error(scaled.view())?);
    }

    let top = pca_fit(scaled.view(), 2)?;
    println!("\nleading two directions:");
    for (i, name) in ds.species_names().iter().enumerate() {
        println!("  {name:<5} {:>8.4} {:>8.4}", top.components[(i, 0)], top.components[(i, 1)]);
    }
    Ok(())
}
