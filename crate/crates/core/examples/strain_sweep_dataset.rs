//! Strain sweep to a flamelet dataset.
//!
//! Each flame shrinks the domain by `shrink`, raising the strain, and is
//! started from the previous solution. Burning, converged flames are stacked
//! into a [`Dataset`](chemtab::Dataset) and written as CSV with a metadata
//! sidecar.
//!
//! ```bash
//! cargo run --release --example strain_sweep_dataset -- 10 0.99
//! ```

use chemtab::dataset::{read_csv, write_csv, write_metadata, DatasetMetadata};
use chemtab::flamelet::{assemble_dataset, strain_sweep, BoundaryConditions, Grid, SolverOptions, SweepOptions};
use chemtab::Mechanism;

fn main() -> chemtab::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_flames: usize = args.next().map_or(10, |s| s.parse().expect("flame count"));
    let shrink: f64 = args.next().map_or(0.99, |s| s.parse().expect("shrink factor"));

    let mech = Mechanism::default_methane();
    let bc = BoundaryConditions::from_mechanism(&mech);
    let grid = Grid::new(200, 0.02)?;
    let opts = SolverOptions::default();
    let sweep = SweepOptions { n_flames, shrink };

    let start = std::time::Instant::now();
    let flames = strain_sweep(&mech, &bc, &sweep, &grid, &opts)?;
    for f in &flames {
        let peak = f.state.t.iter().cloned().fold(f64::MIN, f64::max);
        println!(
            "L = {:.5} m  T_max = {peak:.1} K  steps {:>3}  converged {}  extinguished {}",
            f.flame_key, f.pseudo_steps, f.converged, f.extinguished
        );
    }
    let (ds, dropped) = assemble_dataset(&flames)?;
    println!("{} rows kept, {dropped} dropped, {:.1?}", ds.n_rows(), start.elapsed());

    let dir = tempfile::tempdir()?;
    let csv = dir.path().join("flamelets.csv");
    write_csv(&ds, &csv)?;
    let meta = DatasetMetadata {
        mechanism_hash: mech.content_hash(),
        grid_points: grid.n_points(),
        domain_length: grid.domain_length(),
        n_flames_requested: n_flames,
        n_flames_solved: flames.len(),
        shrink,
        pressure: mech.pressure(),
        solver_tolerance: opts.tolerance,
        max_pseudo_steps: opts.max_pseudo_steps,
        extinction_threshold: opts.extinction_threshold,
        rows_kept: ds.n_rows(),
        rows_dropped: dropped,
    };
    let sidecar = write_metadata(&meta, &csv)?;
    let back = read_csv(&csv)?;
    assert_eq!(back.n_rows(), ds.n_rows());
    println!("wrote {} and {}", csv.display(), sidecar.display());
    println!("first line: {}", std::fs::read_to_string(&csv)?.lines().next().unwrap_or(""));
    Ok(())
}
