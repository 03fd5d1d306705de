//! Training the joint encoder and regressor on a planted task.
//!
//! The planted data hide four orthonormal directions in eight mass
//! fractions; the source energy is a smooth function of those directions and
//! the mixture fraction. A CT(ALL) model should recover the energy and keep
//! its `W` close to orthonormal.
//!
//! ```bash
//! cargo run --release --example train_chemtab -- 200
//! ```
//!
//! The argument caps the number of epochs.

use chemtab::chemtab_model::{holdout, planted_dataset, train, ConstraintConfig, ModelSpec};
use chemtab::eval::evaluate;
use chemtab::nn::TrainControl;

fn main() -> chemtab::Result<()> {
    let epochs: usize = std::env::args().nth(1).map_or(200, |s| s.parse().expect("epoch count"));
    let task = planted_dataset(3000, 8, 4, 21)?;
    let (fit, val) = holdout(&task.dataset, 0.2, 1)?;

    let spec = ModelSpec { trunk_widths: vec![64, 64], ..ModelSpec::default() };
    let control = TrainControl { max_epochs: epochs, ..TrainControl::default() };
    let (model, report) = train(&fit, &val, &spec, &control, ConstraintConfig::all(), 7)?;

    for rec in report.epochs.iter().filter(|r| r.epoch % 20 == 0) {
        println!(
            "epoch {:>4}  loss {:.4}  (UN {:.2e}, WO {:.2e}, AR {:.2e})  val MAE {:.4e}",
            rec.epoch, rec.train.total, rec.train.un, rec.train.wo, rec.train.ar, rec.val_energy_mae
        );
    }
    let best = report.best().expect("at least one epoch");
    println!(
        "best epoch {} of {}, early stop {}, {:.1} s",
        best.epoch,
        report.epochs.len(),
        report.stopped_early,
        report.wall_time_s
    );

    let scored = evaluate(&model, &val)?;
    let spread = {
        let e = val.source_energy();
        let m = e.mean().unwrap_or(0.0);
        (e.iter().map(|v| (v - m).powi(2)).sum::<f64>() / e.len() as f64).sqrt()
    };
    println!("validation energy MAE {:.4e} ({:.4} of one std)", scored.mae_source_energy, scored.mae_source_energy / spread);
    if let Some(c) = scored.conformity {
        println!(
            "column norms in [{:.4}, {:.4}], max |WtW off-diagonal| {:.2e}, max |cov off-diagonal| {:.2e}",
            c.norm_min, c.norm_max, c.max_gram_off_diagonal, c.max_covariance_off_diagonal
        );
    }
    Ok(())
}
