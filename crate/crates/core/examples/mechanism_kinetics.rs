//! Mechanism parsing and mass-action kinetics.
//!
//! Loads the bundled methane mechanism (or a file given as the first
//! argument), prints its species and reactions, then evaluates production
//! rates, the source energy and the mixture fraction for a few mixtures
//! between the fuel and oxidizer streams.
//!
//! ```bash
//! cargo run --release --example mechanism_kinetics
//! cargo run --release --example mechanism_kinetics -- path/to/mechanism.txt
//! ```

use chemtab::mechanism::Mechanism;

fn main() -> chemtab::Result<()> {
    let mech = match std::env::args().nth(1) {
        Some(path) => Mechanism::from_file(path)?,
        None => Mechanism::default_methane(),
    };
    let names = mech.species_names();
    println!("{} species, {} reactions, hash {}", mech.n_species(), mech.reactions().len(), mech.content_hash());
    for sp in mech.species() {
        println!("  {:<5} W = {:.4} kg/mol  h_f = {:>11.4e} J/kg", sp.name, sp.molar_mass, sp.heat_of_formation);
    }
    for (i, r) in mech.reactions().iter().enumerate() {
        let side = |terms: &[(usize, u32)]| {
            terms.iter().map(|(s, n)| format!("{n} {}", names[*s])).collect::<Vec<_>>().join(" + ")
        };
        println!(
            "  r{i}: {} -> {}   A = {:.3e}, b = {}, Ea = {:.3e} J/mol",
            side(&r.reactants),
            side(&r.products),
            r.pre_exponential,
            r.temperature_exponent,
            r.activation_energy
        );
    }

    let fuel = &mech.mixture().fuel;
    let oxid = &mech.mixture().oxidizer;
    println!("\n  blend   Z      T[K]   rho      S_energy [W/m^3]");
    for blend in [0.02, 0.05, 0.1, 0.2] {
        let y: Vec<f64> = fuel.iter().zip(oxid).map(|(f, o)| blend * f + (1.0 - blend) * o).collect();
        let t = 1800.0;
        let rho = mech.density(&y, t);
        let sdot = mech.production_rates(&y, t, rho)?;
        let z = mech.mixture_fraction(&y)?;
        let energy = mech.source_energy(&sdot)?;
        // Reactions conserve mass, so the production rates sum to zero.
        let net: f64 = sdot.iter().sum();
        println!("  {blend:<6}  {z:.3}  {t:.0}  {rho:.4}  {energy:>12.4e}   (sum sdot {net:.1e})");
    }
    Ok(())
}
