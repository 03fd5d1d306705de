//! Species data, Arrhenius kinetics and the derived scalars used downstream:
//! mass-based production rates, source energy and an element-based mixture
//! fraction.

mod parser;

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub use parser::parse_mechanism;

/// Universal gas constant, J/(mol K).
pub const GAS_CONSTANT: f64 = 8.314_462_618;

/// Tolerance on `sum(Y) == 1` accepted by the kinetics entry points.
pub const MASS_FRACTION_SUM_TOL: f64 = 1e-6;

/// Most negative mass fraction accepted before an input is rejected.
pub const NEGATIVE_Y_TOL: f64 = 1e-9;

const COMPOSITION_SUM_TOL: f64 = 1e-12;

const DEFAULT_MECHANISM: &str = include_str!("../../data/methane_synthetic.mech");

#[derive(Debug, Clone, PartialEq)]
pub struct Species {
    pub name: String,
    /// kg/mol
    pub molar_mass: f64,
    /// J/kg
    pub heat_of_formation: f64,
    /// m^2/s
    pub diffusivity: f64,
    /// Atom counts, e.g. `[("C", 1), ("H", 4)]`.
    pub atoms: Vec<(String, u32)>,
}

/// An irreversible elementary reaction obeying the law of mass action.
///
/// Stoichiometric coefficients double as reaction orders.
#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub reactants: Vec<(usize, u32)>,
    pub products: Vec<(usize, u32)>,
    /// Pre-exponential factor in SI units (m^3/mol)^(order-1)/s.
    pub pre_exponential: f64,
    pub temperature_exponent: f64,
    /// J/mol
    pub activation_energy: f64,
}

impl Reaction {
    /// Net stoichiometric coefficient of `species` (products minus reactants).
    pub fn net_coefficient(&self, species: usize) -> i64 {
        let side = |terms: &[(usize, u32)]| -> i64 {
            terms
                .iter()
                .filter(|(i, _)| *i == species)
                .map(|(_, n)| *n as i64)
                .sum()
        };
        side(&self.products) - side(&self.reactants)
    }

    /// Progress rate in mol/(m^3 s) given molar concentrations.
    pub fn progress_rate(&self, temperature: f64, concentrations: &[f64]) -> f64 {
        let arrhenius = self.pre_exponential
            * temperature.powf(self.temperature_exponent)
            * (-self.activation_energy / (GAS_CONSTANT * temperature)).exp();
        self.reactants.iter().fold(arrhenius, |q, &(j, order)| {
            q * concentrations[j].max(0.0).powi(order as i32)
        })
    }
}

/// Mixture-level properties and boundary streams.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    /// W/(m K)
    pub thermal_conductivity: f64,
    /// J/(kg K), shared by all species.
    pub heat_capacity: f64,
    /// Pa
    pub pressure: f64,
    pub fuel: Vec<f64>,
    pub oxidizer: Vec<f64>,
    pub fuel_temperature: f64,
    pub oxidizer_temperature: f64,
    /// Coupling-function coefficients per element (molar basis). Elements not
    /// listed get a zero coefficient.
    pub coupling: Vec<(String, f64)>,
}

/// Default Bilger-style coupling coefficients.
pub fn bilger_coupling() -> Vec<(String, f64)> {
    vec![("C".into(), 2.0), ("H".into(), 0.5), ("O".into(), -1.0)]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mechanism {
    species: Vec<Species>,
    reactions: Vec<Reaction>,
    elements: Vec<String>,
    /// `composition[i][e]`: atoms of element `e` in species `i`.
    composition: Vec<Vec<u32>>,
    mixture: Mixture,
    /// Coupling coefficient per entry of `elements`.
    coupling: Vec<f64>,
    beta_fuel: f64,
    beta_oxidizer: f64,
}

impl Mechanism {
    /// Validates and assembles a mechanism.
    pub fn new(species: Vec<Species>, reactions: Vec<Reaction>, mixture: Mixture) -> Result<Self> {
        let s = species.len();
        if s < 2 {
            return Err(Error::Config(format!("mechanism needs at least 2 species, got {s}")));
        }
        for (i, sp) in species.iter().enumerate() {
            if !(sp.molar_mass > 0.0) || !sp.molar_mass.is_finite() {
                return Err(Error::Config(format!("species {} has non-positive molar mass", sp.name)));
            }
            if !(sp.diffusivity > 0.0) || !sp.diffusivity.is_finite() {
                return Err(Error::Config(format!("species {} has non-positive diffusivity", sp.name)));
            }
            if !sp.heat_of_formation.is_finite() {
                return Err(Error::Config(format!("species {} has non-finite heat of formation", sp.name)));
            }
            if species[..i].iter().any(|o| o.name == sp.name) {
                return Err(Error::Config(format!("duplicate species name {}", sp.name)));
            }
        }
        if !(mixture.thermal_conductivity > 0.0) {
            return Err(Error::Config("thermal conductivity must be positive".into()));
        }
        if !(mixture.heat_capacity > 0.0) {
            return Err(Error::Config("heat capacity must be positive".into()));
        }
        if !(mixture.pressure > 0.0) {
            return Err(Error::Config("pressure must be positive".into()));
        }
        if !(mixture.fuel_temperature > 0.0) || !(mixture.oxidizer_temperature > 0.0) {
            return Err(Error::Config("boundary temperatures must be positive".into()));
        }
        for (label, comp) in [("fuel", &mixture.fuel), ("oxidizer", &mixture.oxidizer)] {
            if comp.len() != s {
                return Err(Error::Dimension(format!("{label} composition has {} entries, expected {s}", comp.len())));
            }
            if comp.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                return Err(Error::Config(format!("{label} composition has negative entries")));
            }
            let sum: f64 = comp.iter().sum();
            if (sum - 1.0).abs() > COMPOSITION_SUM_TOL {
                return Err(Error::Config(format!("{label} composition sums to {sum}, expected 1")));
            }
        }

        let mut elements: Vec<String> = Vec::new();
        for sp in &species {
            for (el, _) in &sp.atoms {
                if !elements.contains(el) {
                    elements.push(el.clone());
                }
            }
        }
        let composition: Vec<Vec<u32>> = species
            .iter()
            .map(|sp| {
                elements
                    .iter()
                    .map(|el| sp.atoms.iter().filter(|(e, _)| e == el).map(|(_, n)| *n).sum())
                    .collect()
            })
            .collect();

        for (r, rx) in reactions.iter().enumerate() {
            if rx.reactants.is_empty() {
                return Err(Error::Config(format!("reaction {r} has no reactants")));
            }
            if !(rx.pre_exponential > 0.0) || !rx.pre_exponential.is_finite() {
                return Err(Error::Config(format!("reaction {r} needs a positive pre-exponential factor")));
            }
            if let Some(&(i, _)) = rx.reactants.iter().chain(&rx.products).find(|(i, _)| *i >= s) {
                return Err(Error::Config(format!("reaction {r} references unknown species index {i}")));
            }
            if let Some(msg) = balance_error(rx, &species, &elements, &composition) {
                return Err(Error::Config(format!("reaction {r} is unbalanced: {msg}")));
            }
        }

        let coupling: Vec<f64> = elements
            .iter()
            .map(|el| {
                mixture
                    .coupling
                    .iter()
                    .find(|(e, _)| e == el)
                    .map_or(0.0, |(_, c)| *c)
            })
            .collect();

        let mut mech = Mechanism {
            species,
            reactions,
            elements,
            composition,
            mixture,
            coupling,
            beta_fuel: 0.0,
            beta_oxidizer: 0.0,
        };
        mech.beta_fuel = mech.coupling_function(&mech.mixture.fuel);
        mech.beta_oxidizer = mech.coupling_function(&mech.mixture.oxidizer);
        Ok(mech)
    }

    /// The bundled 8-species / 5-reaction synthetic methane mechanism.
    pub fn default_methane() -> Self {
        parse_mechanism(DEFAULT_MECHANISM).expect("bundled mechanism is valid")
    }

    pub fn default_text() -> &'static str {
        DEFAULT_MECHANISM
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        parse_mechanism(&std::fs::read_to_string(path)?)
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn elements(&self) -> &[String] {
        &self.elements
    }

    pub fn mixture(&self) -> &Mixture {
        &self.mixture
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn species_names(&self) -> Vec<String> {
        self.species.iter().map(|s| s.name.clone()).collect()
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    pub fn thermal_conductivity(&self) -> f64 {
        self.mixture.thermal_conductivity
    }

    pub fn heat_capacity(&self) -> f64 {
        self.mixture.heat_capacity
    }

    pub fn pressure(&self) -> f64 {
        self.mixture.pressure
    }

    pub fn heats_of_formation(&self) -> Vec<f64> {
        self.species.iter().map(|s| s.heat_of_formation).collect()
    }

    /// Index of the species that carries the mass-fraction remainder in the
    /// flamelet solver: the last species taking part in no reaction, or the
    /// last species if every one reacts.
    pub fn bath_species(&self) -> usize {
        (0..self.n_species())
            .rev()
            .find(|&i| self.reactions.iter().all(|r| !r.reactants.iter().chain(&r.products).any(|(j, _)| *j == i)))
            .unwrap_or(self.n_species() - 1)
    }

    /// Mean molar mass of the mixture, kg/mol.
    pub fn mean_molar_mass(&self, y: &[f64]) -> f64 {
        let inv: f64 = y
            .iter()
            .zip(&self.species)
            .map(|(yi, sp)| yi.max(0.0) / sp.molar_mass)
            .sum();
        1.0 / inv
    }

    /// Ideal-gas density at the mechanism pressure.
    pub fn density(&self, y: &[f64], temperature: f64) -> f64 {
        self.mixture.pressure * self.mean_molar_mass(y) / (GAS_CONSTANT * temperature)
    }

    fn check_mass_fractions(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.n_species() {
            return Err(Error::Dimension(format!(
                "mass-fraction vector has {} entries, mechanism has {} species",
                y.len(),
                self.n_species()
            )));
        }
        if let Some((i, v)) = y.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < -NEGATIVE_Y_TOL) {
            return Err(Error::InputDomain(format!("Y[{}] = {v} ({})", i, self.species[i].name)));
        }
        let sum: f64 = y.iter().sum();
        if (sum - 1.0).abs() > MASS_FRACTION_SUM_TOL {
            return Err(Error::InputDomain(format!("mass fractions sum to {sum}")));
        }
        Ok(())
    }

    /// Net production rates (kg/(m^3 s)) for every species.
    pub fn production_rates(&self, y: &[f64], temperature: f64, density: f64) -> Result<Vec<f64>> {
        self.check_mass_fractions(y)?;
        if !(temperature > 0.0) || !temperature.is_finite() {
            return Err(Error::InputDomain(format!("temperature {temperature} K")));
        }
        if !(density > 0.0) || !density.is_finite() {
            return Err(Error::InputDomain(format!("density {density} kg/m^3")));
        }
        let mut out = vec![0.0; self.n_species()];
        self.production_rates_into(y, temperature, density, &mut out)?;
        Ok(out)
    }

    /// Unchecked kernel behind [`Mechanism::production_rates`]. Negative
    /// mass fractions are floored to zero concentration.
    pub(crate) fn production_rates_into(
        &self,
        y: &[f64],
        temperature: f64,
        density: f64,
        out: &mut [f64],
    ) -> Result<()> {
        let mut conc = [0.0f64; 32];
        let mut conc_vec;
        let conc: &mut [f64] = if y.len() <= conc.len() {
            &mut conc[..y.len()]
        } else {
            conc_vec = vec![0.0; y.len()];
            &mut conc_vec
        };
        for ((c, yi), sp) in conc.iter_mut().zip(y).zip(&self.species) {
            *c = (density * yi / sp.molar_mass).max(0.0);
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        for (r, rx) in self.reactions.iter().enumerate() {
            let q = rx.progress_rate(temperature, conc);
            if !q.is_finite() {
                return Err(Error::Overflow {
                    reaction: r,
                    detail: format!("progress rate {q} at T = {temperature} K"),
                });
            }
            for &(j, n) in &rx.reactants {
                out[j] -= n as f64 * q;
            }
            for &(j, n) in &rx.products {
                out[j] += n as f64 * q;
            }
        }
        for (o, sp) in out.iter_mut().zip(&self.species) {
            *o *= sp.molar_mass;
        }
        Ok(())
    }

    /// `-sum_i h0f_i * Sdot_i`, J/(m^3 s).
    pub fn source_energy(&self, sdot: &[f64]) -> Result<f64> {
        if sdot.len() != self.n_species() {
            return Err(Error::Dimension(format!(
                "source vector has {} entries, mechanism has {} species",
                sdot.len(),
                self.n_species()
            )));
        }
        Ok(self.source_energy_unchecked(sdot))
    }

    pub(crate) fn source_energy_unchecked(&self, sdot: &[f64]) -> f64 {
        -self
            .species
            .iter()
            .zip(sdot)
            .map(|(sp, s)| sp.heat_of_formation * s)
            .sum::<f64>()
    }

    /// Elemental production rates, mol/(m^3 s), one entry per element.
    pub fn element_rates(&self, sdot: &[f64]) -> Vec<f64> {
        (0..self.elements.len())
            .map(|e| {
                sdot.iter()
                    .zip(&self.species)
                    .zip(&self.composition)
                    .map(|((s, sp), comp)| comp[e] as f64 * s / sp.molar_mass)
                    .sum()
            })
            .collect()
    }

    /// Coupling function `sum_e c_e sum_i a_ei Y_i / M_i`, mol/kg.
    pub fn coupling_function(&self, y: &[f64]) -> f64 {
        y.iter()
            .zip(&self.species)
            .zip(&self.composition)
            .map(|((yi, sp), comp)| {
                let per_mole: f64 = comp.iter().zip(&self.coupling).map(|(a, c)| *a as f64 * c).sum();
                per_mole * yi / sp.molar_mass
            })
            .sum()
    }

    /// Element-based mixture fraction: 1 for the fuel stream, 0 for the
    /// oxidizer stream.
    pub fn mixture_fraction(&self, y: &[f64]) -> Result<f64> {
        self.check_mass_fractions(y)?;
        self.mixture_fraction_unchecked(y)
    }

    pub(crate) fn mixture_fraction_unchecked(&self, y: &[f64]) -> Result<f64> {
        let span = self.beta_fuel - self.beta_oxidizer;
        if span.abs() <= f64::EPSILON * (self.beta_fuel.abs() + self.beta_oxidizer.abs()) {
            return Err(Error::Config(
                "fuel and oxidizer have identical coupling-function values".into(),
            ));
        }
        let z = (self.coupling_function(y) - self.beta_oxidizer) / span;
        Ok(if (-1e-9..0.0).contains(&z) {
            0.0
        } else if z > 1.0 && z <= 1.0 + 1e-9 {
            1.0
        } else {
            z
        })
    }

    /// Serializes back to the mechanism text format.
    pub fn to_text(&self) -> String {
        parser::write_mechanism(self)
    }

    /// SHA-256 of the canonical text form, hex encoded.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn balance_error(rx: &Reaction, species: &[Species], elements: &[String], composition: &[Vec<u32>]) -> Option<String> {
    for (e, el) in elements.iter().enumerate() {
        let count = |terms: &[(usize, u32)]| -> u64 {
            terms.iter().map(|&(i, n)| n as u64 * composition[i][e] as u64).sum()
        };
        let (lhs, rhs) = (count(&rx.reactants), count(&rx.products));
        if lhs != rhs {
            return Some(format!("element {el}: {lhs} on reactant side, {rhs} on product side"));
        }
    }
    let mass = |terms: &[(usize, u32)]| -> f64 { terms.iter().map(|&(i, n)| n as f64 * species[i].molar_mass).sum() };
    let (lhs, rhs) = (mass(&rx.reactants), mass(&rx.products));
    if (lhs - rhs).abs() > 1e-12 * lhs.max(rhs) {
        return Some(format!("mass {lhs} kg/mol on reactant side, {rhs} kg/mol on product side"));
    }
    None
}
