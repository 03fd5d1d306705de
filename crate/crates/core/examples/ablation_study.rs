//! A small seeded ablation over constraint subsets and split strategies.
//!
//! Every cell of the plan is trained `repeats` times. Repeat `r` uses the
//! same split and model seeds in every cell, so the table compares methods
//! on identical data. Results are written as CSV and, with the same base
//! seed, are byte-identical across runs and thread counts.
//!
//! ```bash
//! CHEMTAB_THREADS=2 cargo run --release --example ablation_study
//! ```

use chemtab::chemtab_model::ModelSpec;
use chemtab::dataset::SplitMode;
use chemtab::eval::{export_results, run_ablation, thread_count, AblationPlan, AblationSettings};
use chemtab::flamelet::{assemble_dataset, strain_sweep, BoundaryConditions, Grid, SolverOptions, SweepOptions};
use chemtab::nn::TrainControl;
use chemtab::Mechanism;

fn main() -> chemtab::Result<()> {
    let mech = Mechanism::default_methane();
    let bc = BoundaryConditions::from_mechanism(&mech);
    let sweep = SweepOptions { n_flames: 12, shrink: 0.97 };
    let flames = strain_sweep(&mech, &bc, &sweep, &Grid::new(60, 0.02)?, &SolverOptions::default())?;
    let (ds, _) = assemble_dataset(&flames)?;

    let plan = AblationPlan::constraint_study(3, 0.5, 2).merge(AblationPlan::baselines(3, 0.5, 2));
    let settings = AblationSettings {
        spec: ModelSpec { trunk_widths: vec![16, 16], ..ModelSpec::default() },
        control: TrainControl { max_epochs: 40, ..TrainControl::default() },
        threads: thread_count()?,
        ..AblationSettings::default()
    };
    println!("{} cells on {} rows with {} threads", plan.cells.len(), ds.n_rows(), settings.threads);
    let start = std::time::Instant::now();
    let table = run_ablation(&plan, &ds, 17, &settings)?;
    println!("finished in {:.1?}\n", start.elapsed());

    println!("  {:<12} {:>18} {:>18}", "method", "point", "flamelet");
    let mut methods: Vec<&str> = table.rows.iter().map(|r| r.method.as_str()).collect();
    methods.dedup();
    for m in methods {
        let cell = |split| {
            table.find(m, split, 3).map_or("-".to_string(), |r| format!("{:.3e} +/- {:.1e}", r.mae_mean, r.mae_std))
        };
        println!("  {m:<12} {:>18} {:>18}", cell(SplitMode::ByPoint), cell(SplitMode::ByFlamelet));
    }

    let dir = tempfile::tempdir()?;
    for path in export_results(&table, dir.path())? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
