//! Metrics, the ablation harness and plot-ready exports.

mod ablation;
mod export;

use std::time::Instant;

use crate::baselines::LookupBaseline;
use crate::chemtab_model::{ChemTabModel, ConstraintReport, Prediction};
use crate::dataset::{Dataset, SplitMode};
use crate::nn::mae;
use crate::{Error, Result};

pub use ablation::{
    run_ablation, thread_count, AblationCell, AblationPlan, AblationSettings, Method, ResultRow, ResultTable,
};
pub use export::{export_results, read_results, RESULTS_SCHEMA};

/// Anything that maps a dataset to raw-unit source predictions.
pub trait Predictor {
    fn label(&self) -> String;
    fn key_species(&self) -> &[String];
    fn predict_dataset(&self, ds: &Dataset) -> Result<Prediction>;
    fn constraint_report(&self, _ds: &Dataset) -> Result<Option<ConstraintReport>> {
        Ok(None)
    }
}

impl Predictor for ChemTabModel {
    fn label(&self) -> String {
        self.label.clone()
    }

    fn key_species(&self) -> &[String] {
        &self.key_species
    }

    fn predict_dataset(&self, ds: &Dataset) -> Result<Prediction> {
        ChemTabModel::predict_dataset(self, ds)
    }

    fn constraint_report(&self, ds: &Dataset) -> Result<Option<ConstraintReport>> {
        ChemTabModel::constraint_report(self, ds).map(Some)
    }
}

impl Predictor for LookupBaseline {
    fn label(&self) -> String {
        "LOOKUP".into()
    }

    fn key_species(&self) -> &[String] {
        &self.key_species
    }

    fn predict_dataset(&self, ds: &Dataset) -> Result<Prediction> {
        LookupBaseline::predict_dataset(self, ds)
    }
}

/// Scalar summary of a [`ConstraintReport`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conformity {
    /// `NaN` when the encoder has no weight matrix.
    pub max_gram_off_diagonal: f64,
    pub norm_min: f64,
    pub norm_max: f64,
    pub max_covariance_off_diagonal: f64,
}

impl Conformity {
    pub fn from_report(r: &ConstraintReport) -> Self {
        let (norm_min, norm_max) = r.norm_range().unwrap_or((f64::NAN, f64::NAN));
        Self {
            max_gram_off_diagonal: r.max_gram_off_diagonal().unwrap_or(f64::NAN),
            norm_min,
            norm_max,
            max_covariance_off_diagonal: r.max_covariance_off_diagonal(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub method: String,
    pub split: Option<SplitMode>,
    pub p: usize,
    pub seed: u64,
    /// Raw units.
    pub mae_source_energy: f64,
    pub mae_key: Vec<(String, f64)>,
    pub conformity: Option<Conformity>,
    pub wall_time_s: f64,
}

/// MAE of the source energy and of every key species on `test`, in raw
/// units. `split`, `p` and `seed` are left for the caller to fill in.
pub fn evaluate(model: &dyn Predictor, test: &Dataset) -> Result<EvalReport> {
    let started = Instant::now();
    if test.n_rows() == 0 {
        return Err(Error::InputDomain("cannot evaluate on an empty dataset".into()));
    }
    let cols: Vec<usize> = model
        .key_species()
        .iter()
        .map(|k| test.species_index(k).ok_or_else(|| Error::Config(format!("test data lacks key species {k}"))))
        .collect::<Result<_>>()?;
    let pred = model.predict_dataset(test)?;
    let energy = test.source_energy().to_vec();
    let mae_source_energy = mae(&pred.energy.to_vec(), &energy)?;
    let mut mae_key = Vec::with_capacity(cols.len());
    for (j, (&c, name)) in cols.iter().zip(model.key_species()).enumerate() {
        mae_key.push((name.clone(), mae(&pred.key.column(j).to_vec(), &test.sdot().column(c).to_vec())?));
    }
    let conformity = model.constraint_report(test)?.as_ref().map(Conformity::from_report);
    Ok(EvalReport {
        method: model.label(),
        split: None,
        p: 0,
        seed: 0,
        mae_source_energy,
        mae_key,
        conformity,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

/// Mean and sample standard deviation (zero for a single value), both by
/// two passes.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
