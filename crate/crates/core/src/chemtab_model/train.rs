use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Batch, ChemTabModel, ConstraintConfig, LossBreakdown, ModelSpec};
use crate::dataset::{fmt_f64, split, Dataset, SplitMode, SplitSpec};
use crate::nn::{self, Adam, EarlyStopping, TrainControl};
use crate::{Error, Result};

/// Mean training losses of one epoch and the validation metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train: LossBreakdown,
    /// Validation source-energy MAE in raw units.
    pub val_energy_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
    pub wall_time_s: f64,
}

impl TrainReport {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.best_epoch.and_then(|b| self.epochs.iter().find(|r| r.epoch == b))
    }

    /// One row per epoch. Wall time is left out so the file is reproducible.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::from("epoch,loss_energy,loss_key,penalty_un,penalty_wo,penalty_ar,loss_total,val_energy_mae\n");
        for r in &self.epochs {
            let t = &r.train;
            let fields = [t.energy, t.key, t.un, t.wo, t.ar, t.total, r.val_energy_mae].map(fmt_f64);
            out.push_str(&format!("{},{}\n", r.epoch, fields.join(",")));
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(out.as_bytes())?;
        Ok(())
    }
}

/// Splits `ds` by point into a fitting part and a held-out validation part.
pub fn holdout(ds: &Dataset, validation_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    split(ds, &SplitSpec::new(SplitMode::ByPoint, 1.0 - validation_fraction, seed)?)
}

/// Initializes a CT model on `train` and trains it.
pub fn train(
    train: &Dataset,
    val: &Dataset,
    spec: &ModelSpec,
    control: &TrainControl,
    constraints: ConstraintConfig,
    seed: u64,
) -> Result<(ChemTabModel, TrainReport)> {
    let model = ChemTabModel::init(train, spec, constraints, nn::derive_seed(seed, 10))?;
    let control = TrainControl { seed: nn::derive_seed(seed, 11), ..*control };
    train_model(model, train, val, &control)
}

fn mean_losses(acc: &[LossBreakdown]) -> LossBreakdown {
    let n = acc.len() as f64;
    let mut m = LossBreakdown::default();
    for l in acc {
        m.energy += l.energy / n;
        m.key += l.key / n;
        m.un += l.un / n;
        m.wo += l.wo / n;
        m.ar += l.ar / n;
        m.total += l.total / n;
    }
    m
}

fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    // A trailing single row cannot form a covariance, so it joins its neighbour.
    if out.len() > 1 && out.last().is_some_and(|b| b.len() < 2) {
        out.pop();
        let n = out.len();
        let start = (n - 1) * size;
        out[n - 1] = &order[start..];
    }
    out
}

/// Mini-batch Adam with early stopping on the validation source-energy MAE.
/// Returns the parameters of the best epoch.
pub fn train_model(
    model: ChemTabModel,
    train: &Dataset,
    val: &Dataset,
    control: &TrainControl,
) -> Result<(ChemTabModel, TrainReport)> {
    let mut report = TrainReport::default();
    let model = train_model_logged(model, train, val, control, &mut report)?;
    Ok((model, report))
}

/// Same as [`train_model`] but fills `report` as epochs finish, so the log
/// survives a divergence.
pub fn train_model_logged(
    mut model: ChemTabModel,
    train: &Dataset,
    val: &Dataset,
    control: &TrainControl,
    report: &mut TrainReport,
) -> Result<ChemTabModel> {
    control.validate()?;
    let started = Instant::now();
    *report = TrainReport::default();
    if control.max_epochs == 0 {
        report.wall_time_s = started.elapsed().as_secs_f64();
        return Ok(model);
    }
    if train.n_rows() < 2 {
        return Err(Error::InputDomain(format!("training needs at least 2 rows, got {}", train.n_rows())));
    }
    if val.n_rows() == 0 {
        return Err(Error::InputDomain("validation set is empty".into()));
    }
    let data: Batch = model.batch(train, None)?;
    let val_batch = model.batch(val, None)?;

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(nn::derive_seed(control.seed, 0));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(nn::derive_seed(control.seed, 1));
    let mut adam = Adam::new(control.learning_rate);
    let mut stopper = EarlyStopping::new(control.patience);
    let mut best = model.clone();
    let mut order: Vec<usize> = (0..data.n_rows()).collect();

    for epoch in 0..control.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut acc = Vec::new();
        for rows in batches(&order, control.batch_size) {
            let b = data.select(rows);
            let (l, g) = model.loss_and_gradients(&b, Some(&mut dropout_rng))?;
            if !l.total.is_finite() {
                let last = report
                    .epochs
                    .last()
                    .map(|r| format!("last finite epoch {} had total loss {}", r.epoch, r.train.total))
                    .unwrap_or_else(|| "no finite epoch yet".into());
                report.wall_time_s = started.elapsed().as_secs_f64();
                return Err(Error::Diverged { epoch, msg: format!("non-finite batch loss {l:?}; {last}") });
            }
            acc.push(l);
            adam.update(&mut model.param_blocks_mut(), &g.blocks())?;
        }
        let pred = model.predict(val_batch.y.view(), val_batch.z.view())?;
        let val_mae = nn::mae(pred.energy.as_slice().expect("contiguous"), val_batch.energy.as_slice().expect("contiguous"))?;
        if !val_mae.is_finite() {
            report.wall_time_s = started.elapsed().as_secs_f64();
            return Err(Error::Diverged { epoch, msg: "validation MAE is not finite".into() });
        }
        report.epochs.push(EpochRecord { epoch, train: mean_losses(&acc), val_energy_mae: val_mae });
        if stopper.observe(epoch, val_mae) {
            best = model.clone();
            best.clear_caches();
        }
        if stopper.should_stop() {
            report.stopped_early = true;
            break;
        }
    }
    report.best_epoch = stopper.best_epoch;
    report.wall_time_s = started.elapsed().as_secs_f64();
    Ok(best)
}
