//! Point and flamelet splits, normalization and the split manifest.
//!
//! Solves a short sweep, then splits it two ways. A point split scatters
//! rows from every flame across both sides. A flamelet split keeps each
//! flame whole, so the test side only holds strains never seen in training.
//!
//! ```bash
//! cargo run --release --example dataset_splits
//! ```

use std::collections::BTreeSet;

use chemtab::dataset::{fit_norm, split, write_split_manifest, SplitMode, SplitSpec};
use chemtab::flamelet::{assemble_dataset, strain_sweep, BoundaryConditions, Grid, SolverOptions, SweepOptions};
use chemtab::{Dataset, Mechanism};

fn keys(ds: &Dataset) -> BTreeSet<u64> {
    ds.flame_key().iter().map(|k| k.to_bits()).collect()
}

fn main() -> chemtab::Result<()> {
    let mech = Mechanism::default_methane();
    let bc = BoundaryConditions::from_mechanism(&mech);
    let sweep = SweepOptions { n_flames: 8, shrink: 0.95 };
    let flames = strain_sweep(&mech, &bc, &sweep, &Grid::new(100, 0.02)?, &SolverOptions::default())?;
    let (ds, _) = assemble_dataset(&flames)?;
    println!("{} rows from {} flames", ds.n_rows(), ds.flame_keys().len());

    for mode in [SplitMode::ByPoint, SplitMode::ByFlamelet] {
        let spec = SplitSpec::new(mode, 0.75, 11)?;
        let (train, test) = split(&ds, &spec)?;
        let shared = keys(&train).intersection(&keys(&test)).count();
        println!(
            "{:>8}: train {} rows / {} flames, test {} rows / {} flames, flames on both sides {shared}",
            mode.to_string(),
            train.n_rows(),
            keys(&train).len(),
            test.n_rows(),
            keys(&test).len()
        );
    }

    let spec = SplitSpec::new(SplitMode::ByFlamelet, 0.75, 11)?;
    let (train, test) = split(&ds, &spec)?;

    // Statistics come from the training side only and are reused on test rows.
    let stats = fit_norm(&train)?;
    let scaled = stats.apply(&test);
    let restored = stats.unapply(&scaled);
    let drift = (restored.source_energy() - test.source_energy()).mapv(f64::abs).fold(0.0, |a: f64, &b| a.max(b));
    println!("energy mean {:.3e}, std {:.3e}; round-trip drift {drift:.1e}", stats.source_energy.center[0], stats.source_energy.scale[0]);

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("split.txt");
    write_split_manifest(&ds, &spec, &path)?;
    for line in std::fs::read_to_string(&path)?.lines().take(6) {
        println!("  {line}");
    }
    Ok(())
}
