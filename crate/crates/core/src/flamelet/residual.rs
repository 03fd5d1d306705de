//! Finite-volume assembly of the steady species and energy balances on a
//! uniform vertex-centred grid. Face coefficients use the harmonic mean of
//! the neighbouring `rho * D_i`.

use crate::mechanism::Mechanism;
use crate::Result;

/// Reference temperature of the sensible enthalpy `h_i = cp (T - T_REF)`.
pub const T_REF: f64 = 298.15;

/// Equation scales turning raw residuals into stencil units. Both share
/// `rho_ref * D_max / dx^2`, so one unit of pseudo time moves mass
/// fractions and `cp T / T_scale` at the same rate.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Scales {
    pub species: f64,
    pub energy: f64,
    pub temperature: f64,
}

impl Scales {
    pub fn new(mech: &Mechanism, dx: f64, rho_ref: f64, t_scale: f64) -> Self {
        let d_max = mech.species().iter().map(|s| s.diffusivity).fold(0.0, f64::max);
        Self {
            species: rho_ref * d_max / (dx * dx),
            energy: rho_ref * d_max * mech.heat_capacity() * t_scale / (dx * dx),
            temperature: t_scale,
        }
    }
}

/// Reusable buffers for [`assemble`].
#[derive(Debug, Clone)]
pub(crate) struct Workspace {
    pub sdot: Vec<f64>,
    flux: Vec<f64>,
    energy_flux: Vec<f64>,
}

impl Workspace {
    pub fn new(n: usize, s: usize) -> Self {
        Self { sdot: vec![0.0; n * s], flux: vec![0.0; (n - 1) * s], energy_flux: vec![0.0; n - 1] }
    }
}

/// Scaled residuals of every interior node, `out[(j - 1) * s + v]`, where
/// `v` walks the transported species (all but `bath`) followed by energy.
///
/// `y` is row-major `n x s`, boundary rows included.
#[allow(clippy::too_many_arguments)]
pub(crate) fn assemble(
    mech: &Mechanism,
    dx: f64,
    y: &[f64],
    t: &[f64],
    rho: &[f64],
    bath: usize,
    scales: &Scales,
    ws: &mut Workspace,
    out: &mut [f64],
) -> Result<()> {
    let n = t.len();
    let s = mech.n_species();
    let kappa = mech.thermal_conductivity();
    let cp = mech.heat_capacity();
    let species = mech.species();

    for j in 1..n - 1 {
        mech.production_rates_into(&y[j * s..(j + 1) * s], t[j], rho[j], &mut ws.sdot[j * s..(j + 1) * s])?;
    }
    for f in 0..n - 1 {
        let rho_face = 2.0 * rho[f] * rho[f + 1] / (rho[f] + rho[f + 1]);
        let mut total = 0.0;
        for (i, sp) in species.iter().enumerate() {
            if i == bath {
                continue;
            }
            let flux = sp.diffusivity * rho_face * (y[(f + 1) * s + i] - y[f * s + i]) / dx;
            ws.flux[f * s + i] = flux;
            total += flux;
        }
        // the bath species closes the balance so the net mass flux is zero
        ws.flux[f * s + bath] = -total;
        // every species shares cp, so h_i = cp (T - T_REF) at the face
        let h_face = cp * (0.5 * (t[f] + t[f + 1]) - T_REF);
        let enthalpy: f64 = ws.flux[f * s..(f + 1) * s].iter().map(|j| j * h_face).sum();
        ws.energy_flux[f] = kappa * (t[f + 1] - t[f]) / dx + enthalpy;
    }
    for j in 1..n - 1 {
        let row = &mut out[(j - 1) * s..j * s];
        let sdot = &ws.sdot[j * s..(j + 1) * s];
        let mut v = 0;
        for i in 0..s {
            if i == bath {
                continue;
            }
            let r = (ws.flux[j * s + i] - ws.flux[(j - 1) * s + i]) / dx + sdot[i];
            row[v] = r / scales.species;
            v += 1;
        }
        let energy = mech.source_energy_unchecked(sdot);
        let r = (ws.energy_flux[j] - ws.energy_flux[j - 1]) / dx + energy;
        row[s - 1] = r / scales.energy;
    }
    Ok(())
}

/// Root-mean-square of a residual vector.
pub(crate) fn rms(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}
