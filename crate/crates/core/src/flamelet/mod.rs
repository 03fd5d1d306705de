//! Steady 1-D flamelets between an oxidizer boundary (`x = 0`) and a fuel
//! boundary (`x = L`), solved by pseudo-transient continuation, plus the
//! strain sweep that turns a sequence of shrinking domains into a corpus.

mod blocktri;
mod residual;
mod sweep;

use ndarray::{Array1, Array2};

use crate::mechanism::{Mechanism, NEGATIVE_Y_TOL};
use crate::{Error, Result};

use blocktri::BlockTridiagonal;
pub use residual::T_REF;
use residual::{assemble, rms, Scales, Workspace};
pub use sweep::{assemble_dataset, interpolate_state, strain_sweep, SweepOptions};

/// Uniform grid with `n_points` nodes, boundaries included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n_points: usize,
    domain_length: f64,
}

impl Grid {
    pub fn new(n_points: usize, domain_length: f64) -> Result<Self> {
        if n_points < 3 {
            return Err(Error::InputDomain(format!("grid needs at least 3 points, got {n_points}")));
        }
        if !(domain_length > 0.0) || !domain_length.is_finite() {
            return Err(Error::InputDomain(format!("domain length {domain_length} must be positive")));
        }
        Ok(Self { n_points, domain_length })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn domain_length(&self) -> f64 {
        self.domain_length
    }

    pub fn dx(&self) -> f64 {
        self.domain_length / (self.n_points - 1) as f64
    }

    pub fn x(&self) -> Array1<f64> {
        let dx = self.dx();
        Array1::from_iter((0..self.n_points).map(|j| j as f64 * dx))
    }

    pub fn with_length(&self, domain_length: f64) -> Result<Self> {
        Self::new(self.n_points, domain_length)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConditions {
    pub oxidizer_y: Vec<f64>,
    pub oxidizer_t: f64,
    pub fuel_y: Vec<f64>,
    pub fuel_t: f64,
}

impl BoundaryConditions {
    /// Fuel and oxidizer streams as declared in the mechanism.
    pub fn from_mechanism(mech: &Mechanism) -> Self {
        let m = mech.mixture();
        Self {
            oxidizer_y: m.oxidizer.clone(),
            oxidizer_t: m.oxidizer_temperature,
            fuel_y: m.fuel.clone(),
            fuel_t: m.fuel_temperature,
        }
    }

    pub fn max_temperature(&self) -> f64 {
        self.oxidizer_t.max(self.fuel_t)
    }

    fn validate(&self, s: usize) -> Result<()> {
        for (label, y, t) in [("oxidizer", &self.oxidizer_y, self.oxidizer_t), ("fuel", &self.fuel_y, self.fuel_t)] {
            if y.len() != s {
                return Err(Error::Dimension(format!("{label} boundary has {} species, expected {s}", y.len())));
            }
            let sum: f64 = y.iter().sum();
            if y.iter().any(|v| *v < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InputDomain(format!("{label} boundary is not a valid mass-fraction vector")));
            }
            if !(t > 0.0) {
                return Err(Error::InputDomain(format!("{label} boundary temperature {t} K")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlameletState {
    /// `n_points x s` mass fractions.
    pub y: Array2<f64>,
    /// K
    pub t: Array1<f64>,
    /// kg/m^3
    pub rho: Array1<f64>,
}

impl FlameletState {
    pub fn n_points(&self) -> usize {
        self.t.len()
    }

    pub fn validate(&self, s: usize) -> Result<()> {
        let n = self.t.len();
        if self.y.nrows() != n || self.rho.len() != n || self.y.ncols() != s {
            return Err(Error::Dimension(format!(
                "state shapes disagree: Y {:?}, T {}, rho {}, species {s}",
                self.y.dim(),
                n,
                self.rho.len()
            )));
        }
        for (j, row) in self.y.rows().into_iter().enumerate() {
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::InputDomain(format!("mass fractions at node {j} sum to {sum}")));
            }
            if let Some(v) = row.iter().find(|v| **v < -NEGATIVE_Y_TOL || !v.is_finite()) {
                return Err(Error::InputDomain(format!("mass fraction {v} at node {j}")));
            }
        }
        if let Some(j) = self.t.iter().position(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(Error::InputDomain(format!("temperature {} at node {j}", self.t[j])));
        }
        if let Some(j) = self.rho.iter().position(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::InputDomain(format!("density {} at node {j}", self.rho[j])));
        }
        Ok(())
    }
}

/// How density is obtained from the local state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityModel {
    /// Ideal gas at the mechanism pressure.
    IdealGas,
    /// Fixed density everywhere, kg/m^3.
    Constant(f64),
}

impl DensityModel {
    fn density(&self, mech: &Mechanism, y: &[f64], t: f64) -> f64 {
        match *self {
            DensityModel::IdealGas => mech.density(y, t),
            DensityModel::Constant(rho) => rho,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Scaled RMS residual at which a state counts as steady.
    pub tolerance: f64,
    pub max_pseudo_steps: usize,
    /// Initial pseudo time step in cell-diffusion units.
    pub dt_initial: f64,
    pub dt_max: f64,
    pub dt_min: f64,
    pub dt_growth: f64,
    pub max_newton_iterations: usize,
    /// Newton stops once the largest scaled update falls below this.
    pub newton_tolerance: f64,
    pub density: DensityModel,
    /// K above the hotter boundary below which a flame counts as extinguished.
    pub extinction_threshold: f64,
    /// Initial-guess peak temperature at the stoichiometric location.
    pub ignition_temperature: f64,
    /// Gaussian width of the ignition bump as a fraction of the domain.
    pub ignition_width: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_pseudo_steps: 400,
            dt_initial: 1e-2,
            dt_max: 1e14,
            dt_min: 1e-12,
            dt_growth: 1.5,
            max_newton_iterations: 8,
            newton_tolerance: 1e-11,
            density: DensityModel::IdealGas,
            extinction_threshold: 150.0,
            ignition_temperature: 2000.0,
            ignition_width: 0.08,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlameletSolution {
    /// Strain tag: the domain length, m.
    pub flame_key: f64,
    pub grid: Grid,
    pub species_names: Vec<String>,
    pub state: FlameletState,
    /// `n_points x s`, kg/(m^3 s)
    pub sdot: Array2<f64>,
    pub z_mix: Array1<f64>,
    pub source_energy: Array1<f64>,
    pub converged: bool,
    pub extinguished: bool,
    /// Final scaled RMS residual.
    pub residual: f64,
    pub pseudo_steps: usize,
}

/// True when the peak temperature rises less than `threshold` above the
/// hotter boundary.
pub fn detect_extinction(solution: &FlameletSolution, bc: &BoundaryConditions, threshold: f64) -> bool {
    state_extinguished(&solution.state, bc, threshold)
}

fn state_extinguished(state: &FlameletState, bc: &BoundaryConditions, threshold: f64) -> bool {
    let t_max = state.t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    t_max - bc.max_temperature() < threshold
}

/// Stoichiometric mixture fraction (zero of the coupling function), or 0.5
/// when the streams do not bracket it.
pub fn stoichiometric_mixture_fraction(mech: &Mechanism, bc: &BoundaryConditions) -> f64 {
    let beta_ox = mech.coupling_function(&bc.oxidizer_y);
    let beta_fuel = mech.coupling_function(&bc.fuel_y);
    let z_of_zero_beta = -beta_ox / (beta_fuel - beta_ox);
    if z_of_zero_beta.is_finite() && z_of_zero_beta > 0.0 && z_of_zero_beta < 1.0 {
        z_of_zero_beta
    } else {
        0.5
    }
}

/// Linear profiles between the boundaries with a Gaussian temperature bump
/// at the stoichiometric location.
pub fn initial_guess(mech: &Mechanism, grid: &Grid, bc: &BoundaryConditions, opts: &SolverOptions) -> FlameletState {
    let n = grid.n_points();
    let s = mech.n_species();
    let z_st = stoichiometric_mixture_fraction(mech, bc);
    let width = opts.ignition_width.max(1e-6);
    let mut y = Array2::zeros((n, s));
    let mut t = Array1::zeros(n);
    let mut rho = Array1::zeros(n);
    for j in 0..n {
        let xi = j as f64 / (n - 1) as f64;
        for i in 0..s {
            y[(j, i)] = (1.0 - xi) * bc.oxidizer_y[i] + xi * bc.fuel_y[i];
        }
        let t_lin = (1.0 - xi) * bc.oxidizer_t + xi * bc.fuel_t;
        let bump = (opts.ignition_temperature - t_lin).max(0.0) * (-0.5 * ((xi - z_st) / width).powi(2)).exp();
        t[j] = if j == 0 || j == n - 1 { t_lin } else { t_lin + bump };
    }
    for j in 0..n {
        let row: Vec<f64> = y.row(j).to_vec();
        rho[j] = opts.density.density(mech, &row, t[j]);
    }
    FlameletState { y, t, rho }
}

/// Scaled RMS residual of the discrete steady equations for `state`.
///
/// Boundary rows are taken from `bc`; the stored densities are used as-is.
pub fn residual(mech: &Mechanism, grid: &Grid, bc: &BoundaryConditions, state: &FlameletState) -> Result<f64> {
    let s = mech.n_species();
    let n = grid.n_points();
    if state.t.len() != n || state.y.dim() != (n, s) || state.rho.len() != n {
        return Err(Error::Dimension(format!(
            "state {:?} does not fit a {n}-point grid with {s} species",
            state.y.dim()
        )));
    }
    bc.validate(s)?;
    let mut y: Vec<f64> = state.y.iter().copied().collect();
    let mut t = state.t.to_vec();
    y[..s].copy_from_slice(&bc.oxidizer_y);
    y[(n - 1) * s..].copy_from_slice(&bc.fuel_y);
    t[0] = bc.oxidizer_t;
    t[n - 1] = bc.fuel_t;
    let rho = state.rho.to_vec();
    let scales = Scales::new(mech, grid.dx(), rho[0], bc.max_temperature());
    let mut ws = Workspace::new(n, s);
    let mut out = vec![0.0; (n - 2) * s];
    assemble(mech, grid.dx(), &y, &t, &rho, mech.bath_species(), &scales, &mut ws, &mut out)?;
    Ok(rms(&out))
}

const MAX_THETA_STEP: f64 = 0.5;
const Y_FLOOR: f64 = 1e-5;

/// Pseudo-transient solver state for one (mechanism, grid, boundary) triple.
struct Problem<'a> {
    mech: &'a Mechanism,
    dx: f64,
    n: usize,
    s: usize,
    bath: usize,
    transported: Vec<usize>,
    scales: Scales,
    density: DensityModel,
    /// Full row-major `n x s` mass fractions; boundary rows fixed.
    y: Vec<f64>,
    t: Vec<f64>,
    rho: Vec<f64>,
    ws: Workspace,
}

impl<'a> Problem<'a> {
    fn n_unknowns(&self) -> usize {
        (self.n - 2) * self.s
    }

    fn load_unknowns(&mut self, u: &[f64]) {
        let s = self.s;
        for j in 1..self.n - 1 {
            let block = &u[(j - 1) * s..j * s];
            let mut others = 0.0;
            for (v, &i) in self.transported.iter().enumerate() {
                self.y[j * s + i] = block[v];
                others += block[v];
            }
            self.y[j * s + self.bath] = 1.0 - others;
            self.t[j] = block[s - 1] * self.scales.temperature;
            self.rho[j] = self.density.density(self.mech, &self.y[j * s..(j + 1) * s], self.t[j]);
        }
    }

    fn unknowns(&self) -> Vec<f64> {
        let s = self.s;
        let mut u = vec![0.0; self.n_unknowns()];
        for j in 1..self.n - 1 {
            for (v, &i) in self.transported.iter().enumerate() {
                u[(j - 1) * s + v] = self.y[j * s + i];
            }
            u[(j - 1) * s + s - 1] = self.t[j] / self.scales.temperature;
        }
        u
    }

    fn eval(&mut self, u: &[f64], out: &mut [f64]) -> Result<()> {
        self.load_unknowns(u);
        assemble(self.mech, self.dx, &self.y, &self.t, &self.rho, self.bath, &self.scales, &mut self.ws, out)
    }

    /// Finite-difference Jacobian of the scaled residual, one colour per
    /// residue class mod 3 of the node index.
    fn jacobian(&mut self, u: &[f64], g: &[f64]) -> Result<BlockTridiagonal> {
        let s = self.s;
        let m = self.n - 2;
        let mut jac = BlockTridiagonal::zeros(m, s);
        let mut up = u.to_vec();
        let mut gp = vec![0.0; u.len()];
        let mut steps = vec![0.0; m];
        for colour in 0..3 {
            for v in 0..s {
                up.copy_from_slice(u);
                for j in (colour..m).step_by(3) {
                    let k = j * s + v;
                    let h = 1e-7 * (u[k].abs() + 1e-2);
                    steps[j] = h;
                    up[k] += h;
                }
                self.eval(&up, &mut gp)?;
                for j in (colour..m).step_by(3) {
                    let h = steps[j];
                    for r in 0..s {
                        jac.diag[j][(r, v)] = (gp[j * s + r] - g[j * s + r]) / h;
                        if j > 0 {
                            jac.upper[j - 1][(r, v)] = (gp[(j - 1) * s + r] - g[(j - 1) * s + r]) / h;
                        }
                        if j + 1 < m {
                            jac.lower[j + 1][(r, v)] = (gp[(j + 1) * s + r] - g[(j + 1) * s + r]) / h;
                        }
                    }
                }
            }
        }
        Ok(jac)
    }

    /// One implicit Euler step `(u - u_old) / dt = G(u)` solved by Newton.
    fn pseudo_step(&mut self, u_old: &[f64], dt: f64, opts: &SolverOptions) -> Option<Vec<f64>> {
        let s = self.s;
        let mut u = u_old.to_vec();
        let mut g = vec![0.0; u.len()];
        // local density relative to the reference acts as the capacity of
        // the pseudo-time term, frozen at the start of the step
        self.load_unknowns(u_old);
        let rho_ref = self.rho[0];
        let capacity: Vec<f64> = (1..self.n - 1).map(|j| self.rho[j] / rho_ref).collect();
        for _ in 0..opts.max_newton_iterations {
            self.eval(&u, &mut g).ok()?;
            if g.iter().any(|v| !v.is_finite()) {
                return None;
            }
            let mut jac = self.jacobian(&u, &g).ok()?;
            for (d, m) in jac.diag.iter_mut().zip(&capacity) {
                for r in 0..s {
                    for c in 0..s {
                        d[(r, c)] = -d[(r, c)];
                    }
                    d[(r, r)] += m / dt;
                }
            }
            for b in jac.lower.iter_mut().chain(jac.upper.iter_mut()) {
                b.neg_mut();
            }
            let mut delta: Vec<f64> = (0..u.len()).map(|k| g[k] - capacity[k / s] * (u[k] - u_old[k]) / dt).collect();
            if !jac.solve(&mut delta) {
                return None;
            }
            let lambda = self.damping(&u, &delta);
            let mut max_step = 0.0f64;
            for (ui, di) in u.iter_mut().zip(&delta) {
                *ui += lambda * di;
                max_step = max_step.max(di.abs());
            }
            if !self.admissible(&u) {
                return None;
            }
            if max_step < opts.newton_tolerance {
                return Some(u);
            }
        }
        None
    }

    /// Largest step fraction keeping mass fractions above the admissible
    /// floor and limiting temperature moves to a fraction of the scale.
    fn damping(&self, u: &[f64], delta: &[f64]) -> f64 {
        let s = self.s;
        let mut lambda = 1.0f64;
        for (k, (ui, di)) in u.iter().zip(delta).enumerate() {
            if k % s == s - 1 {
                if di.abs() > MAX_THETA_STEP {
                    lambda = lambda.min(MAX_THETA_STEP / di.abs());
                }
            } else if ui + di < -Y_FLOOR && *di < 0.0 {
                lambda = lambda.min(((-Y_FLOOR - ui) / di).max(0.0) * 0.9 + 1e-3);
            }
        }
        lambda.clamp(1e-3, 1.0)
    }

    fn admissible(&self, u: &[f64]) -> bool {
        let s = self.s;
        u.chunks(s).all(|block| {
            let theta = block[s - 1];
            let others: f64 = block[..s - 1].iter().sum();
            theta.is_finite()
                && theta * self.scales.temperature > 50.0
                && block[..s - 1].iter().all(|y| y.is_finite() && *y > -1e-4 && *y < 1.0 + 1e-4)
                && others < 1.0 + 1e-4
        })
    }
}

/// Solves the steady flamelet equations starting from `init`.
pub fn solve_steady(
    mech: &Mechanism,
    grid: &Grid,
    bc: &BoundaryConditions,
    init: &FlameletState,
    opts: &SolverOptions,
) -> Result<FlameletSolution> {
    let s = mech.n_species();
    let n = grid.n_points();
    bc.validate(s)?;
    if init.n_points() != n {
        return Err(Error::Dimension(format!("initial state has {} points, grid has {n}", init.n_points())));
    }
    if let Some(j) = init.t.iter().position(|v| !v.is_finite()) {
        return Err(Error::Solver { step: 0, cell: j, msg: "non-finite temperature in initial state".into() });
    }
    if let Some(k) = init.y.iter().position(|v| !v.is_finite()) {
        return Err(Error::Solver { step: 0, cell: k / s, msg: "non-finite mass fraction in initial state".into() });
    }
    init.validate(s)?;

    let bath = mech.bath_species();
    let transported: Vec<usize> = (0..s).filter(|&i| i != bath).collect();
    let mut y: Vec<f64> = init.y.iter().copied().collect();
    let mut t = init.t.to_vec();
    y[..s].copy_from_slice(&bc.oxidizer_y);
    y[(n - 1) * s..].copy_from_slice(&bc.fuel_y);
    t[0] = bc.oxidizer_t;
    t[n - 1] = bc.fuel_t;
    let mut rho = vec![0.0; n];
    for j in 0..n {
        rho[j] = opts.density.density(mech, &y[j * s..(j + 1) * s], t[j]);
    }
    let scales = Scales::new(mech, grid.dx(), rho[0], bc.max_temperature());
    let mut prob = Problem {
        mech,
        dx: grid.dx(),
        n,
        s,
        bath,
        transported,
        scales,
        density: opts.density,
        y,
        t,
        rho,
        ws: Workspace::new(n, s),
    };

    let mut u = prob.unknowns();
    let mut g = vec![0.0; u.len()];
    prob.eval(&u, &mut g)?;
    let mut res = rms(&g);
    let mut dt = opts.dt_initial;
    let mut steps = 0;
    let mut converged = res <= opts.tolerance;
    while !converged && steps < opts.max_pseudo_steps {
        steps += 1;
        match prob.pseudo_step(&u, dt, opts) {
            Some(next) => {
                u = next;
                prob.eval(&u, &mut g)?;
                res = rms(&g);
                converged = res <= opts.tolerance;
                dt = (dt * opts.dt_growth).min(opts.dt_max);
            }
            None => {
                dt *= 0.5;
                if dt < opts.dt_min {
                    break;
                }
            }
        }
    }
    if converged {
        // one steady Newton polish; kept only if it lowers the residual
        if let Some(next) = prob.pseudo_step(&u, opts.dt_max, opts) {
            prob.eval(&next, &mut g)?;
            let polished = rms(&g);
            if polished < res {
                u = next;
                res = polished;
            }
        }
    }
    prob.load_unknowns(&u);
    finish(mech, grid, bc, prob, converged, res, steps, opts)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    mech: &Mechanism,
    grid: &Grid,
    bc: &BoundaryConditions,
    prob: Problem<'_>,
    converged: bool,
    residual: f64,
    pseudo_steps: usize,
    opts: &SolverOptions,
) -> Result<FlameletSolution> {
    let (n, s) = (prob.n, prob.s);
    let y = Array2::from_shape_vec((n, s), prob.y).map_err(|e| Error::Dimension(e.to_string()))?;
    let state = FlameletState { y, t: Array1::from(prob.t), rho: Array1::from(prob.rho) };
    let mut sdot = Array2::zeros((n, s));
    let mut z_mix = Array1::zeros(n);
    let mut energy = Array1::zeros(n);
    let mut buf = vec![0.0; s];
    for j in 0..n {
        let row = state.y.row(j).to_vec();
        mech.production_rates_into(&row, state.t[j], state.rho[j], &mut buf)?;
        sdot.row_mut(j).assign(&ndarray::ArrayView1::from(&buf[..]));
        energy[j] = mech.source_energy_unchecked(&buf);
        z_mix[j] = mech.mixture_fraction_unchecked(&row)?;
    }
    let extinguished = state_extinguished(&state, bc, opts.extinction_threshold);
    Ok(FlameletSolution {
        flame_key: grid.domain_length(),
        grid: *grid,
        species_names: mech.species_names(),
        state,
        sdot,
        z_mix,
        source_energy: energy,
        converged,
        extinguished,
        residual,
        pseudo_steps,
    })
}

#[cfg(test)]
mod tests;
