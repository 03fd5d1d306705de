use ndarray::{Array1, Array2};

use super::{initial_guess, solve_steady, BoundaryConditions, FlameletSolution, FlameletState, Grid, SolverOptions};
use crate::dataset::{Dataset, DatasetColumns};
use crate::mechanism::Mechanism;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub n_flames: usize,
    /// Domain-length factor between consecutive flames.
    pub shrink: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { n_flames: 100, shrink: 0.99 }
    }
}

/// Linear interpolation of a state onto another grid in the normalized
/// coordinate `x / L`, so the flame keeps its place relative to the
/// boundaries when the domain shrinks. Densities are interpolated too.
pub fn interpolate_state(state: &FlameletState, from: &Grid, to: &Grid) -> FlameletState {
    let n_from = from.n_points();
    let n_to = to.n_points();
    let s = state.y.ncols();
    let mut y = Array2::zeros((n_to, s));
    let mut t = Array1::zeros(n_to);
    let mut rho = Array1::zeros(n_to);
    for j in 0..n_to {
        let mut pos = j as f64 / (n_to - 1) as f64 * (n_from - 1) as f64;
        if (pos - pos.round()).abs() < 1e-9 {
            pos = pos.round();
        }
        let lo = (pos.floor() as usize).min(n_from - 2);
        let w = pos - lo as f64;
        for i in 0..s {
            y[(j, i)] = (1.0 - w) * state.y[(lo, i)] + w * state.y[(lo + 1, i)];
        }
        t[j] = (1.0 - w) * state.t[lo] + w * state.t[lo + 1];
        rho[j] = (1.0 - w) * state.rho[lo] + w * state.rho[lo + 1];
    }
    FlameletState { y, t, rho }
}

/// Continuation over domains `L0 * shrink^j`. Stops after the first flame
/// that extinguishes or fails to converge; that flame is still returned so
/// callers can see why the sweep ended.
pub fn strain_sweep(
    mech: &Mechanism,
    bc: &BoundaryConditions,
    sweep: &SweepOptions,
    grid0: &Grid,
    opts: &SolverOptions,
) -> Result<Vec<FlameletSolution>> {
    if !(sweep.shrink > 0.0 && sweep.shrink < 1.0) {
        return Err(Error::InputDomain(format!("shrink factor {} must lie in (0, 1)", sweep.shrink)));
    }
    if sweep.n_flames == 0 {
        return Err(Error::InputDomain("n_flames must be at least 1".into()));
    }
    let first = solve_steady(mech, grid0, bc, &initial_guess(mech, grid0, bc, opts), opts)?;
    if !first.converged {
        return Err(Error::Solver {
            step: first.pseudo_steps,
            cell: 0,
            msg: format!("first flame did not converge (residual {:.3e})", first.residual),
        });
    }
    let mut out = vec![first];
    let mut length = grid0.domain_length();
    for _ in 1..sweep.n_flames {
        let prev = out.last().expect("non-empty");
        if prev.extinguished || !prev.converged {
            break;
        }
        length *= sweep.shrink;
        let grid = grid0.with_length(length)?;
        let init = interpolate_state(&prev.state, &prev.grid, &grid);
        out.push(solve_steady(mech, &grid, bc, &init, opts)?);
    }
    Ok(out)
}

/// Stacks every converged, burning flame into a dataset in sweep order.
/// Returns the dataset and the number of rows dropped.
pub fn assemble_dataset(solutions: &[FlameletSolution]) -> Result<(Dataset, usize)> {
    let first = solutions
        .first()
        .ok_or_else(|| Error::InputDomain("assemble_dataset needs at least one solution".into()))?;
    let names = first.species_names.clone();
    let s = names.len();
    let mut dropped = 0;
    let mut flame_key = Vec::new();
    let mut x = Vec::new();
    let mut z_mix = Vec::new();
    let mut temperature = Vec::new();
    let mut y = Vec::new();
    let mut sdot = Vec::new();
    let mut energy = Vec::new();
    for sol in solutions {
        if sol.species_names != names || sol.state.y.ncols() != s || sol.sdot.ncols() != s {
            return Err(Error::Dimension(format!(
                "solution with flame key {} has {} species, expected {s}",
                sol.flame_key,
                sol.state.y.ncols()
            )));
        }
        let n = sol.state.n_points();
        if sol.extinguished || !sol.converged {
            dropped += n;
            continue;
        }
        let xs = sol.grid.x();
        for j in 0..n {
            flame_key.push(sol.flame_key);
            x.push(xs[j]);
            z_mix.push(sol.z_mix[j]);
            temperature.push(sol.state.t[j]);
            y.extend(sol.state.y.row(j).iter().copied());
            sdot.extend(sol.sdot.row(j).iter().copied());
            energy.push(sol.source_energy[j]);
        }
    }
    let columns = DatasetColumns {
        flame_key,
        x,
        z_mix,
        temperature,
        y,
        sdot,
        source_energy: energy,
    };
    Ok((Dataset::from_columns(names, columns)?, dropped))
}
