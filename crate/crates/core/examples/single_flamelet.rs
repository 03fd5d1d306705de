//! One steady counterflow flamelet by pseudo-transient Newton continuation.
//!
//! ```bash
//! cargo run --release --example single_flamelet -- 0.02 200
//! ```
//!
//! Arguments are the domain length in metres and the number of grid points.
//! Prints the temperature and mixture-fraction profile and the steady
//! residual.

use chemtab::flamelet::{
    detect_extinction, initial_guess, residual, solve_steady, stoichiometric_mixture_fraction, BoundaryConditions, Grid,
    SolverOptions,
};
use chemtab::Mechanism;

fn main() -> chemtab::Result<()> {
    let mut args = std::env::args().skip(1);
    let length: f64 = args.next().map_or(0.02, |s| s.parse().expect("domain length"));
    let points: usize = args.next().map_or(200, |s| s.parse().expect("grid points"));

    let mech = Mechanism::default_methane();
    let bc = BoundaryConditions::from_mechanism(&mech);
    let grid = Grid::new(points, length)?;
    let opts = SolverOptions::default();

    let start = std::time::Instant::now();
    let init = initial_guess(&mech, &grid, &bc, &opts);
    let sol = solve_steady(&mech, &grid, &bc, &init, &opts)?;
    println!(
        "converged {} after {} pseudo steps in {:.2?}, residual {:.2e} (recomputed {:.2e})",
        sol.converged,
        sol.pseudo_steps,
        start.elapsed(),
        sol.residual,
        residual(&mech, &grid, &bc, &sol.state)?
    );
    println!(
        "Z_st = {:.4}, extinguished: {}",
        stoichiometric_mixture_fraction(&mech, &bc),
        detect_extinction(&sol, &bc, opts.extinction_threshold)
    );

    let x = grid.x();
    println!("\n  x [mm]   Z       T [K]    S_energy");
    for j in (0..points).step_by((points / 20).max(1)) {
        println!(
            "  {:>6.2}   {:.4}  {:>7.1}  {:>11.3e}",
            x[j] * 1e3,
            sol.z_mix[j],
            sol.state.t[j],
            sol.source_energy[j]
        );
    }
    Ok(())
}
