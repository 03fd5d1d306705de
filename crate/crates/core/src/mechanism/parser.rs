//! Text format:
//!
//! ```text
//! [species]
//! CH4 0.016043 -4.6668e6 2.1e-5 elem:C=1 elem:H=4
//! [reactions]
//! CH4 + O2 -> CO + H2O + H2 | A=1e8 beta=0 Ea=1.2e5
//! 2*H2 + O2 -> 2*H2O | A=... beta=... Ea=...
//! [mixture]
//! fuel: CH4=1.0
//! oxidizer: O2=0.233,N2=0.767
//! kappa=0.05
//! cp=1400
//! pressure=101325
//! ```
//!
//! `T_fuel=`, `T_oxidizer=` (default 300 K) and `coupling: C=2,H=0.5,O=-1`
//! are optional mixture entries. `#` starts a comment.

use super::{bilger_coupling, Mechanism, Mixture, Reaction, Species};
use crate::{Error, Result};

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Species,
    Reactions,
    Mixture,
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_f64(line: usize, what: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| perr(line, format!("invalid number for {what}: '{s}'")))
}

pub fn parse_mechanism(text: &str) -> Result<Mechanism> {
    let mut section = Section::None;
    let mut species: Vec<Species> = Vec::new();
    // (line number, raw reaction line) – resolved once all species are known
    let mut reaction_lines: Vec<(usize, String)> = Vec::new();
    let mut fuel: Option<(usize, Vec<(String, f64)>)> = None;
    let mut oxidizer: Option<(usize, Vec<(String, f64)>)> = None;
    let mut kappa = None;
    let mut cp = None;
    let mut pressure = None;
    let mut t_fuel = 300.0;
    let mut t_ox = 300.0;
    let mut coupling = bilger_coupling();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            section = match line {
                "[species]" => Section::Species,
                "[reactions]" => Section::Reactions,
                "[mixture]" => Section::Mixture,
                other => return Err(perr(lineno, format!("unknown section {other}"))),
            };
            continue;
        }
        match section {
            Section::None => return Err(perr(lineno, "content before any section header")),
            Section::Species => species.push(parse_species(lineno, line)?),
            Section::Reactions => reaction_lines.push((lineno, line.to_string())),
            Section::Mixture => {
                if let Some(rest) = line.strip_prefix("fuel:") {
                    fuel = Some((lineno, parse_pairs(lineno, rest)?));
                } else if let Some(rest) = line.strip_prefix("oxidizer:") {
                    oxidizer = Some((lineno, parse_pairs(lineno, rest)?));
                } else if let Some(rest) = line.strip_prefix("coupling:") {
                    coupling = parse_pairs(lineno, rest)?;
                } else if let Some((key, value)) = line.split_once('=') {
                    let v = parse_f64(lineno, key.trim(), value)?;
                    match key.trim() {
                        "kappa" => kappa = Some(v),
                        "cp" => cp = Some(v),
                        "pressure" => pressure = Some(v),
                        "T_fuel" => t_fuel = v,
                        "T_oxidizer" => t_ox = v,
                        other => return Err(perr(lineno, format!("unknown mixture key '{other}'"))),
                    }
                } else {
                    return Err(perr(lineno, format!("cannot parse mixture line '{line}'")));
                }
            }
        }
    }

    let mut reactions = Vec::with_capacity(reaction_lines.len());
    for (lineno, line) in &reaction_lines {
        let rx = parse_reaction(*lineno, line, &species)?;
        check_balance(*lineno, &rx, &species)?;
        reactions.push(rx);
    }

    let resolve = |label: &str, entry: Option<(usize, Vec<(String, f64)>)>| -> Result<Vec<f64>> {
        let (lineno, pairs) = entry.ok_or_else(|| perr(0, format!("missing '{label}:' mixture entry")))?;
        let mut comp = vec![0.0; species.len()];
        for (name, frac) in pairs {
            let i = species
                .iter()
                .position(|s| s.name == name)
                .ok_or_else(|| perr(lineno, format!("unknown species '{name}' in {label} composition")))?;
            comp[i] += frac;
        }
        Ok(comp)
    };
    let mixture = Mixture {
        thermal_conductivity: kappa.ok_or_else(|| perr(0, "missing kappa"))?,
        heat_capacity: cp.ok_or_else(|| perr(0, "missing cp"))?,
        pressure: pressure.ok_or_else(|| perr(0, "missing pressure"))?,
        fuel: resolve("fuel", fuel)?,
        oxidizer: resolve("oxidizer", oxidizer)?,
        fuel_temperature: t_fuel,
        oxidizer_temperature: t_ox,
        coupling,
    };
    Mechanism::new(species, reactions, mixture)
}

fn parse_species(lineno: usize, line: &str) -> Result<Species> {
    let mut fields = line.split_whitespace();
    let name = fields.next().ok_or_else(|| perr(lineno, "empty species line"))?.to_string();
    let mut next_num = |what: &str| -> Result<f64> {
        let tok = fields
            .next()
            .ok_or_else(|| perr(lineno, format!("species {name}: missing {what}")))?;
        parse_f64(lineno, what, tok)
    };
    let molar_mass = next_num("molar_mass")?;
    let heat_of_formation = next_num("h0f")?;
    let diffusivity = next_num("diffusivity")?;
    let mut atoms = Vec::new();
    for tok in fields {
        let spec = tok
            .strip_prefix("elem:")
            .ok_or_else(|| perr(lineno, format!("unexpected token '{tok}'")))?;
        let (el, n) = spec
            .split_once('=')
            .ok_or_else(|| perr(lineno, format!("malformed element entry '{tok}'")))?;
        let n: u32 = n
            .trim()
            .parse()
            .map_err(|_| perr(lineno, format!("element count must be a nonnegative integer: '{tok}'")))?;
        atoms.push((el.trim().to_string(), n));
    }
    if !(molar_mass > 0.0) {
        return Err(perr(lineno, format!("species {name}: molar mass must be positive")));
    }
    if !(diffusivity > 0.0) {
        return Err(perr(lineno, format!("species {name}: diffusivity must be positive")));
    }
    Ok(Species { name, molar_mass, heat_of_formation, diffusivity, atoms })
}

fn parse_pairs(lineno: usize, text: &str) -> Result<Vec<(String, f64)>> {
    text.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|tok| {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| perr(lineno, format!("expected name=value, got '{tok}'")))?;
            Ok((k.trim().to_string(), parse_f64(lineno, k.trim(), v)?))
        })
        .collect()
}

fn parse_side(lineno: usize, text: &str, species: &[Species]) -> Result<Vec<(usize, u32)>> {
    let mut terms: Vec<(usize, u32)> = Vec::new();
    for tok in text.split('+') {
        let tok = tok.trim();
        if tok.is_empty() {
            return Err(perr(lineno, "empty term in reaction"));
        }
        let (coef, name) = match tok.split_once('*') {
            Some((c, n)) => (
                c.trim()
                    .parse::<u32>()
                    .map_err(|_| perr(lineno, format!("invalid stoichiometric coefficient '{c}'")))?,
                n.trim(),
            ),
            None => (1, tok),
        };
        let i = species
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| perr(lineno, format!("unknown species '{name}'")))?;
        if coef == 0 {
            continue;
        }
        match terms.iter_mut().find(|(j, _)| *j == i) {
            Some(t) => t.1 += coef,
            None => terms.push((i, coef)),
        }
    }
    Ok(terms)
}

fn parse_reaction(lineno: usize, line: &str, species: &[Species]) -> Result<Reaction> {
    let (equation, params) = line
        .split_once('|')
        .ok_or_else(|| perr(lineno, "reaction needs '| A=.. beta=.. Ea=..'"))?;
    let (lhs, rhs) = equation
        .split_once("->")
        .ok_or_else(|| perr(lineno, "reaction needs '->'"))?;
    let reactants = parse_side(lineno, lhs, species)?;
    let products = parse_side(lineno, rhs, species)?;
    if reactants.is_empty() {
        return Err(perr(lineno, "reaction has no reactants"));
    }
    let (mut a, mut beta, mut ea) = (None, None, None);
    for tok in params.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| perr(lineno, format!("expected key=value, got '{tok}'")))?;
        let v = parse_f64(lineno, k, v)?;
        match k {
            "A" => a = Some(v),
            "beta" => beta = Some(v),
            "Ea" => ea = Some(v),
            other => return Err(perr(lineno, format!("unknown rate parameter '{other}'"))),
        }
    }
    let pre_exponential = a.ok_or_else(|| perr(lineno, "missing A"))?;
    if !(pre_exponential > 0.0) {
        return Err(perr(lineno, "pre-exponential factor must be positive"));
    }
    Ok(Reaction {
        reactants,
        products,
        pre_exponential,
        temperature_exponent: beta.ok_or_else(|| perr(lineno, "missing beta"))?,
        activation_energy: ea.ok_or_else(|| perr(lineno, "missing Ea"))?,
    })
}

fn check_balance(lineno: usize, rx: &Reaction, species: &[Species]) -> Result<()> {
    let mut elements: Vec<&str> = Vec::new();
    for sp in species {
        for (el, _) in &sp.atoms {
            if !elements.contains(&el.as_str()) {
                elements.push(el);
            }
        }
    }
    for el in elements {
        let count = |terms: &[(usize, u32)]| -> u64 {
            terms
                .iter()
                .map(|&(i, n)| {
                    n as u64
                        * species[i]
                            .atoms
                            .iter()
                            .filter(|(e, _)| e == el)
                            .map(|(_, c)| *c as u64)
                            .sum::<u64>()
                })
                .sum()
        };
        let (lhs, rhs) = (count(&rx.reactants), count(&rx.products));
        if lhs != rhs {
            return Err(perr(
                lineno,
                format!("unbalanced reaction: element {el} has {lhs} atoms on the left, {rhs} on the right"),
            ));
        }
    }
    let mass = |terms: &[(usize, u32)]| -> f64 { terms.iter().map(|&(i, n)| n as f64 * species[i].molar_mass).sum() };
    let (lhs, rhs) = (mass(&rx.reactants), mass(&rx.products));
    if (lhs - rhs).abs() > 1e-12 * lhs.max(rhs) {
        return Err(perr(
            lineno,
            format!("unbalanced reaction: reactant mass {lhs} kg/mol, product mass {rhs} kg/mol"),
        ));
    }
    Ok(())
}

pub(super) fn write_mechanism(mech: &Mechanism) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let names = mech.species_names();
    out.push_str("[species]\n");
    for sp in mech.species() {
        let _ = write!(out, "{} {} {} {}", sp.name, sp.molar_mass, sp.heat_of_formation, sp.diffusivity);
        for (el, n) in &sp.atoms {
            let _ = write!(out, " elem:{el}={n}");
        }
        out.push('\n');
    }
    out.push_str("[reactions]\n");
    let side = |terms: &[(usize, u32)]| -> String {
        terms
            .iter()
            .map(|&(i, n)| if n == 1 { names[i].clone() } else { format!("{n}*{}", names[i]) })
            .collect::<Vec<_>>()
            .join(" + ")
    };
    for rx in mech.reactions() {
        let _ = writeln!(
            out,
            "{} -> {} | A={} beta={} Ea={}",
            side(&rx.reactants),
            side(&rx.products),
            rx.pre_exponential,
            rx.temperature_exponent,
            rx.activation_energy
        );
    }
    let mix = mech.mixture();
    let comp = |c: &[f64]| -> String {
        c.iter()
            .zip(&names)
            .filter(|(v, _)| **v != 0.0)
            .map(|(v, n)| format!("{n}={v}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    out.push_str("[mixture]\n");
    let _ = writeln!(out, "fuel: {}", comp(&mix.fuel));
    let _ = writeln!(out, "oxidizer: {}", comp(&mix.oxidizer));
    let _ = writeln!(out, "kappa={}", mix.thermal_conductivity);
    let _ = writeln!(out, "cp={}", mix.heat_capacity);
    let _ = writeln!(out, "pressure={}", mix.pressure);
    let _ = writeln!(out, "T_fuel={}", mix.fuel_temperature);
    let _ = writeln!(out, "T_oxidizer={}", mix.oxidizer_temperature);
    let coupling = mix
        .coupling
        .iter()
        .map(|(e, c)| format!("{e}={c}"))
        .collect::<Vec<_>>()
        .join(",");
    let _ = writeln!(out, "coupling: {coupling}");
    out
}
