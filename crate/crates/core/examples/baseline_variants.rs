//! Every encoder variant trained on the same flamelet split.
//!
//! CT variants learn `W` under a subset of constraints. UL_ENC learns `W`
//! with no constraints and NL_ENC swaps `W` for a small network. PCA_PVG and
//! FGM_CPVG freeze `W` to principal directions or to a fixed product sum.
//! The LOOKUP row uses a `(Z_mix, C_pv)` table instead of a network.
//!
//! ```bash
//! cargo run --release --example baseline_variants -- 100
//! ```

use chemtab::baselines::{make_variant, FgmWeights, LookupBaseline, VariantKind};
use chemtab::chemtab_model::{holdout, train_model, ConstraintConfig, ModelSpec};
use chemtab::dataset::{split, SplitMode, SplitSpec};
use chemtab::eval::evaluate;
use chemtab::flamelet::{assemble_dataset, strain_sweep, BoundaryConditions, Grid, SolverOptions, SweepOptions};
use chemtab::nn::TrainControl;
use chemtab::Mechanism;

fn main() -> chemtab::Result<()> {
    let epochs: usize = std::env::args().nth(1).map_or(100, |s| s.parse().expect("epoch count"));
    let mech = Mechanism::default_methane();
    let bc = BoundaryConditions::from_mechanism(&mech);
    let sweep = SweepOptions { n_flames: 12, shrink: 0.97 };
    let flames = strain_sweep(&mech, &bc, &sweep, &Grid::new(100, 0.02)?, &SolverOptions::default())?;
    let (ds, _) = assemble_dataset(&flames)?;
    let (train, test) = split(&ds, &SplitSpec::new(SplitMode::ByFlamelet, 0.75, 5)?)?;
    let (fit, val) = holdout(&train, 0.1, 6)?;

    let spec = ModelSpec { trunk_widths: vec![32, 32], ..ModelSpec::default() };
    let control = TrainControl { max_epochs: epochs, seed: 8, ..TrainControl::default() };
    let fgm = FgmWeights::default();
    let mut kinds = vec![VariantKind::Ct(ConstraintConfig::all()), VariantKind::Ct(ConstraintConfig::parse("UN+WO")?)];
    kinds.extend(VariantKind::baselines());

    println!("{} training rows, {} test rows\n", fit.n_rows(), test.n_rows());
    println!("  {:<12} {:>12}  {:>10}", "method", "energy MAE", "max |WtW|");
    for kind in kinds {
        let model = make_variant(kind, &fit, &spec, ConstraintConfig::all(), &fgm, 9)?;
        let (model, _) = train_model(model, &fit, &val, &control)?;
        let r = evaluate(&model, &test)?;
        let gram = match r.conformity {
            Some(c) if !c.max_gram_off_diagonal.is_nan() => format!("{:.2e}", c.max_gram_off_diagonal),
            _ => "-".to_string(),
        };
        println!("  {:<12} {:>12.4e}  {gram:>10}", kind.label(), r.mae_source_energy);
    }
    let keys = spec.resolve_key_species(ds.species_names())?;
    let lookup = LookupBaseline::fit(&fit, &fgm, &keys, &[200, 100])?;
    println!("  {:<12} {:>12.4e}  {:>10}", "LOOKUP", evaluate(&lookup, &test)?.mae_source_energy, "-");
    Ok(())
}
