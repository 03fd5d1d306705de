use std::sync::OnceLock;

use super::*;

/// Default species with equal diffusivities and no reactions.
fn diffusion_only(fuel_t: f64) -> (Mechanism, BoundaryConditions) {
    let base = Mechanism::default_methane();
    let mut species = base.species().to_vec();
    for sp in species.iter_mut() {
        sp.diffusivity = 2.0e-5;
    }
    let mut mixture = base.mixture().clone();
    mixture.fuel_temperature = fuel_t;
    let mech = Mechanism::new(species, Vec::new(), mixture).unwrap();
    let bc = BoundaryConditions::from_mechanism(&mech);
    (mech, bc)
}

fn linear_state(mech: &Mechanism, grid: &Grid, bc: &BoundaryConditions, rho: f64) -> FlameletState {
    let n = grid.n_points();
    let s = mech.n_species();
    let mut y = Array2::zeros((n, s));
    let mut t = Array1::zeros(n);
    for j in 0..n {
        let xi = j as f64 / (n - 1) as f64;
        for i in 0..s {
            y[(j, i)] = (1.0 - xi) * bc.oxidizer_y[i] + xi * bc.fuel_y[i];
        }
        t[j] = (1.0 - xi) * bc.oxidizer_t + xi * bc.fuel_t;
    }
    FlameletState { y, t, rho: Array1::from_elem(n, rho) }
}

fn reacting() -> &'static (Mechanism, Grid, BoundaryConditions, FlameletSolution) {
    static CELL: OnceLock<(Mechanism, Grid, BoundaryConditions, FlameletSolution)> = OnceLock::new();
    CELL.get_or_init(|| {
        let mech = Mechanism::default_methane();
        let bc = BoundaryConditions::from_mechanism(&mech);
        let grid = Grid::new(200, 0.02).unwrap();
        let opts = SolverOptions::default();
        let sol = solve_steady(&mech, &grid, &bc, &initial_guess(&mech, &grid, &bc, &opts), &opts).unwrap();
        (mech, grid, bc, sol)
    })
}

/// Straight-from-the-equations residual written node by node, sharing no
/// code with the solver's assembly.
fn oracle_residual(mech: &Mechanism, grid: &Grid, state: &FlameletState) -> f64 {
    let n = grid.n_points();
    let s = mech.n_species();
    let dx = grid.dx();
    let bath = mech.bath_species();
    let sp = mech.species();
    let cp = mech.heat_capacity();
    let kappa = mech.thermal_conductivity();
    let d_max = sp.iter().map(|x| x.diffusivity).fold(0.0, f64::max);
    let t_scale = state.t[0].max(state.t[n - 1]);
    let unit = state.rho[0] * d_max / (dx * dx);

    let rd_face = |a: usize, b: usize, d: f64| {
        let (ra, rb) = (state.rho[a] * d, state.rho[b] * d);
        2.0 * ra * rb / (ra + rb)
    };
    // Fickian flux of species i across the face between a and a + 1; the
    // bath species takes whatever keeps the total at zero
    let flux = |a: usize, i: usize| -> f64 {
        if i == bath {
            -(0..s)
                .filter(|&k| k != bath)
                .map(|k| rd_face(a, a + 1, sp[k].diffusivity) * (state.y[(a + 1, k)] - state.y[(a, k)]) / dx)
                .sum::<f64>()
        } else {
            rd_face(a, a + 1, sp[i].diffusivity) * (state.y[(a + 1, i)] - state.y[(a, i)]) / dx
        }
    };
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    for j in 1..n - 1 {
        let y: Vec<f64> = state.y.row(j).to_vec();
        let mut sdot = vec![0.0; s];
        mech.production_rates_into(&y, state.t[j], state.rho[j], &mut sdot).unwrap();
        for i in 0..s {
            if i == bath {
                continue;
            }
            let r = (flux(j, i) - flux(j - 1, i)) / dx + sdot[i];
            sum_sq += (r / unit).powi(2);
            count += 1;
        }
        let heat = |a: usize| {
            let h = cp * ((state.t[a] + state.t[a + 1]) / 2.0 - T_REF);
            kappa * (state.t[a + 1] - state.t[a]) / dx + (0..s).map(|i| flux(a, i) * h).sum::<f64>()
        };
        let q: f64 = -(0..s).map(|i| sp[i].heat_of_formation * sdot[i]).sum::<f64>();
        let r = (heat(j) - heat(j - 1)) / dx + q;
        sum_sq += (r / (unit * cp * t_scale)).powi(2);
        count += 1;
    }
    (sum_sq / count as f64).sqrt()
}

#[test]
fn grid_rejects_bad_shapes() {
    assert!(matches!(Grid::new(2, 1.0), Err(Error::InputDomain(_))));
    assert!(matches!(Grid::new(10, 0.0), Err(Error::InputDomain(_))));
    let g = Grid::new(5, 1.0).unwrap();
    assert_eq!(g.x().to_vec(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
}

#[test]
fn linear_profile_is_exact_discrete_diffusion_solution() {
    let (mech, bc) = diffusion_only(400.0);
    let grid = Grid::new(41, 0.01).unwrap();
    let state = linear_state(&mech, &grid, &bc, 1.1);
    let r = residual(&mech, &grid, &bc, &state).unwrap();
    assert!(r <= 1e-14, "residual {r}");
}

#[test]
fn diffusion_only_solve_recovers_linear_profiles() {
    let (mech, bc) = diffusion_only(400.0);
    let grid = Grid::new(60, 0.01).unwrap();
    let opts = SolverOptions { tolerance: 1e-14, density: DensityModel::Constant(1.1), ..SolverOptions::default() };
    let init = initial_guess(&mech, &grid, &bc, &opts);
    let sol = solve_steady(&mech, &grid, &bc, &init, &opts).unwrap();
    assert!(sol.converged);
    let exact = linear_state(&mech, &grid, &bc, 1.1);
    let err_y = (&sol.state.y - &exact.y).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let err_t = (&sol.state.t - &exact.t).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(err_y <= 1e-10, "Y error {err_y}");
    assert!(err_t <= 1e-10, "T error {err_t}");
    assert!(residual(&mech, &grid, &bc, &sol.state).unwrap() <= 1e-12);
    for row in sol.state.y.rows() {
        assert!((row.sum() - 1.0).abs() <= 1e-9);
    }
    // mixture fraction rises monotonically from the oxidizer to the fuel
    assert!(sol.z_mix[0].abs() < 1e-12 && (sol.z_mix[grid.n_points() - 1] - 1.0).abs() < 1e-12);
    assert!(sol.z_mix.windows(2).into_iter().all(|w| w[1] > w[0]));
}

#[test]
fn residual_grows_linearly_with_a_small_perturbation() {
    let (mech, bc) = diffusion_only(300.0);
    let grid = Grid::new(21, 0.01).unwrap();
    let base = linear_state(&mech, &grid, &bc, 1.0);
    let at = |eps: f64| {
        let mut st = base.clone();
        st.y[(10, 0)] += eps;
        st.y[(10, 7)] -= eps;
        residual(&mech, &grid, &bc, &st).unwrap()
    };
    let slopes: Vec<f64> = [1e-4, 1e-5, 1e-6, 1e-7].iter().map(|&e| at(e) / e).collect();
    for w in slopes.windows(2) {
        assert!((w[0] / w[1] - 1.0).abs() < 1e-6, "slopes {slopes:?}");
    }
}

#[test]
fn residual_rejects_shape_mismatch() {
    let (mech, bc) = diffusion_only(300.0);
    let grid = Grid::new(21, 0.01).unwrap();
    let other = Grid::new(11, 0.01).unwrap();
    let state = linear_state(&mech, &other, &bc, 1.0);
    assert!(matches!(residual(&mech, &grid, &bc, &state), Err(Error::Dimension(_))));
}

#[test]
fn assembly_matches_independent_oracle_off_solution() {
    let (mech, grid, bc, sol) = reacting();
    // a non-steady state: the ignition guess with ideal-gas densities
    let opts = SolverOptions::default();
    let guess = initial_guess(mech, grid, bc, &opts);
    let a = residual(mech, grid, bc, &guess).unwrap();
    let b = oracle_residual(mech, grid, &guess);
    assert!(a > 1e-3);
    assert!((a - b).abs() <= 1e-10 * b, "{a} vs {b}");
    let a = residual(mech, grid, bc, &sol.state).unwrap();
    let b = oracle_residual(mech, grid, &sol.state);
    assert!((a - b).abs() <= 1e-6 * b + 1e-14, "{a} vs {b}");
}

#[test]
fn reacting_flame_converges_under_oracle() {
    let (mech, grid, bc, sol) = reacting();
    assert!(sol.converged && !sol.extinguished);
    assert!(sol.residual <= 1e-8);
    assert!(oracle_residual(mech, grid, &sol.state) <= 1e-8);
    sol.state.validate(mech.n_species()).unwrap();
    let t_max = sol.state.t.iter().copied().fold(0.0, f64::max);
    assert!(t_max > bc.max_temperature() + 2.0 * opts_threshold());
    assert!(!detect_extinction(sol, bc, opts_threshold()));
}

fn opts_threshold() -> f64 {
    SolverOptions::default().extinction_threshold
}

#[test]
fn reacting_flame_conserves_mass_at_every_node() {
    let (_, _, _, sol) = reacting();
    for row in sol.sdot.rows() {
        let scale = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(row.sum().abs() <= 1e-10 * scale.max(f64::MIN_POSITIVE));
    }
}

#[test]
fn source_energy_and_mixture_fraction_come_from_the_mechanism() {
    let (mech, _, _, sol) = reacting();
    for j in (0..sol.state.n_points()).step_by(17) {
        let sdot: Vec<f64> = sol.sdot.row(j).to_vec();
        assert_eq!(sol.source_energy[j], mech.source_energy(&sdot).unwrap());
        let y: Vec<f64> = sol.state.y.row(j).to_vec();
        assert_eq!(sol.z_mix[j], mech.mixture_fraction_unchecked(&y).unwrap());
    }
}

#[test]
fn extinction_detection_on_trivial_profiles() {
    let (mech, grid, bc, sol) = reacting();
    let mut cold = sol.clone();
    let lin = linear_state(mech, grid, bc, 1.0);
    cold.state.t = lin.t;
    assert!(detect_extinction(&cold, bc, 150.0));
    let mut hot = sol.clone();
    hot.state.t.fill(bc.max_temperature());
    hot.state.t[50] = bc.max_temperature() + 300.0;
    assert!(!detect_extinction(&hot, bc, 150.0));
}

#[test]
fn nan_initial_state_aborts_with_location() {
    let (mech, bc) = diffusion_only(300.0);
    let grid = Grid::new(11, 0.01).unwrap();
    let mut st = linear_state(&mech, &grid, &bc, 1.0);
    st.t[4] = f64::NAN;
    match solve_steady(&mech, &grid, &bc, &st, &SolverOptions::default()) {
        Err(Error::Solver { step: 0, cell: 4, .. }) => {}
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn exhausted_step_budget_reports_non_convergence() {
    let (mech, grid, bc, _) = reacting();
    let opts = SolverOptions { max_pseudo_steps: 2, ..SolverOptions::default() };
    let sol = solve_steady(mech, grid, bc, &initial_guess(mech, grid, bc, &opts), &opts).unwrap();
    assert!(!sol.converged);
    assert!(sol.residual > opts.tolerance);
    assert_eq!(sol.pseudo_steps, 2);
}

#[test]
fn single_flame_sweep_uses_grid0() {
    let (mech, grid, bc, sol) = reacting();
    let sweep = SweepOptions { n_flames: 1, shrink: 0.99 };
    let out = strain_sweep(mech, bc, &sweep, grid, &SolverOptions::default()).unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].flame_key, grid.domain_length());
    assert_eq!(out[0].state.t, sol.state.t);
}

#[test]
fn sweep_validates_arguments() {
    let (mech, grid, bc, _) = reacting();
    let opts = SolverOptions::default();
    for sweep in [SweepOptions { n_flames: 3, shrink: 1.0 }, SweepOptions { n_flames: 0, shrink: 0.9 }] {
        assert!(matches!(strain_sweep(mech, bc, &sweep, grid, &opts), Err(Error::InputDomain(_))));
    }
}

#[test]
fn continuation_matches_cold_start_and_keys_follow_shrink() {
    let (mech, grid, bc, _) = reacting();
    let opts = SolverOptions::default();
    let sweep = SweepOptions { n_flames: 12, shrink: 0.99 };
    let out = strain_sweep(mech, bc, &sweep, grid, &opts).unwrap();
    assert_eq!(out.len(), 12);
    for (j, sol) in out.iter().enumerate() {
        let expected = grid.domain_length() * 0.99f64.powi(j as i32);
        assert!((sol.flame_key - expected).abs() <= 1e-15 * expected);
        assert!(sol.converged && !sol.extinguished);
    }
    let last = out.last().unwrap();
    let cold = solve_steady(mech, &last.grid, bc, &initial_guess(mech, &last.grid, bc, &opts), &opts).unwrap();
    let tmax = |s: &FlameletSolution| s.state.t.iter().copied().fold(0.0, f64::max);
    assert!((tmax(&cold) - tmax(last)).abs() <= 1.0);
}

#[test]
fn high_threshold_stops_the_sweep_early() {
    let (mech, grid, bc, sol) = reacting();
    let peak = sol.state.t.iter().copied().fold(0.0, f64::max) - bc.max_temperature();
    let opts = SolverOptions { extinction_threshold: peak + 50.0, ..SolverOptions::default() };
    let sweep = SweepOptions { n_flames: 20, shrink: 0.99 };
    let out = strain_sweep(mech, bc, &sweep, grid, &opts).unwrap();
    assert!(out.len() < 20);
    let (last, rest) = out.split_last().unwrap();
    assert!(rest.iter().all(|s| !s.extinguished));
    assert!(last.extinguished);
}

fn toy_solution(key: f64, n: usize, names: &[&str], extinguished: bool) -> FlameletSolution {
    let s = names.len();
    let grid = Grid::new(n, key).unwrap();
    let mut y = Array2::zeros((n, s));
    y.column_mut(0).fill(1.0);
    FlameletSolution {
        flame_key: key,
        grid,
        species_names: names.iter().map(|v| v.to_string()).collect(),
        state: FlameletState { y, t: Array1::from_iter((0..n).map(|j| 300.0 + j as f64)), rho: Array1::ones(n) },
        sdot: Array2::from_elem((n, s), key),
        z_mix: Array1::from_iter((0..n).map(|j| j as f64 / (n - 1) as f64)),
        source_energy: Array1::from_elem(n, 2.0 * key),
        converged: true,
        extinguished,
        residual: 0.0,
        pseudo_steps: 0,
    }
}

#[test]
fn assemble_single_flame_keeps_grid_order() {
    let sol = toy_solution(0.5, 3, &["A", "B"], false);
    let (ds, dropped) = assemble_dataset(&[sol]).unwrap();
    assert_eq!(ds.n_rows(), 3);
    assert_eq!(dropped, 0);
    assert_eq!(ds.x().to_vec(), vec![0.0, 0.25, 0.5]);
    assert_eq!(ds.temperature().to_vec(), vec![300.0, 301.0, 302.0]);
}

#[test]
fn assemble_drops_extinguished_flames() {
    let sols: Vec<_> = (0..100).map(|k| toy_solution(1.0 + k as f64, 200, &["A", "B"], k % 10 == 3)).collect();
    let (ds, dropped) = assemble_dataset(&sols).unwrap();
    assert_eq!(ds.n_rows(), 18_000);
    assert_eq!(dropped, 2_000);
    let keys = ds.flame_keys();
    assert_eq!(keys.len(), 90);
    for k in (0..100).filter(|k| k % 10 == 3) {
        assert!(!keys.contains(&(1.0 + k as f64)));
    }
}

#[test]
fn assemble_rejects_mixed_species() {
    let a = toy_solution(1.0, 3, &["A", "B"], false);
    let b = toy_solution(2.0, 3, &["A", "B", "C"], false);
    assert!(matches!(assemble_dataset(&[a, b]), Err(Error::Dimension(_))));
    assert!(matches!(assemble_dataset(&[]), Err(Error::InputDomain(_))));
}

#[test]
fn interpolation_is_identity_on_the_same_point_count() {
    let (_, grid, _, sol) = reacting();
    let shorter = grid.with_length(grid.domain_length() * 0.5).unwrap();
    let st = interpolate_state(&sol.state, grid, &shorter);
    assert_eq!(st, sol.state);
    let half = Grid::new(3, 1.0).unwrap();
    let fine = Grid::new(5, 1.0).unwrap();
    let coarse = FlameletState {
        y: Array2::from_shape_vec((3, 1), vec![1.0, 1.0, 1.0]).unwrap(),
        t: Array1::from(vec![300.0, 500.0, 400.0]),
        rho: Array1::from(vec![1.0, 1.0, 1.0]),
    };
    let st = interpolate_state(&coarse, &half, &fine);
    assert_eq!(st.t.to_vec(), vec![300.0, 400.0, 500.0, 450.0, 400.0]);
}
