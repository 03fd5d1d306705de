use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::{evaluate, mean_std, Conformity, EvalReport};
use crate::baselines::{make_variant, FgmWeights, LookupBaseline, VariantKind, DEFAULT_TABLE_SIZES};
use crate::chemtab_model::{holdout, train_model, ConstraintConfig, ModelSpec};
use crate::dataset::{split, Dataset, SplitMode, SplitSpec};
use crate::nn::{derive_seed, TrainControl};
use crate::{Error, Result};

/// Something the harness can fit and score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Trained(VariantKind),
    /// Two-PV `(Z_mix, C_pv)` table.
    Lookup,
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Trained(k) => k.label(),
            Method::Lookup => "LOOKUP".into(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("lookup") {
            Ok(Method::Lookup)
        } else {
            Ok(Method::Trained(s.parse()?))
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AblationCell {
    pub method: Method,
    pub p: usize,
    pub split: SplitMode,
    pub fraction: f64,
    pub repeats: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AblationPlan {
    pub cells: Vec<AblationCell>,
}

impl AblationPlan {
    /// The seven constraint subsets under both split strategies.
    pub fn constraint_study(p: usize, fraction: f64, repeats: usize) -> Self {
        let mut cells = Vec::new();
        for c in ConstraintConfig::ablation_variants() {
            for split in [SplitMode::ByPoint, SplitMode::ByFlamelet] {
                cells.push(AblationCell { method: Method::Trained(VariantKind::Ct(c)), p, split, fraction, repeats });
            }
        }
        Self { cells }
    }

    /// CT(ALL) for each PV count under both split strategies.
    pub fn pv_sweep(ps: &[usize], fraction: f64, repeats: usize) -> Self {
        let mut cells = Vec::new();
        for &p in ps {
            for split in [SplitMode::ByPoint, SplitMode::ByFlamelet] {
                let method = Method::Trained(VariantKind::Ct(ConstraintConfig::all()));
                cells.push(AblationCell { method, p, split, fraction, repeats });
            }
        }
        Self { cells }
    }

    /// Baseline methods plus CT(ALL) under both split strategies.
    pub fn baselines(p: usize, fraction: f64, repeats: usize) -> Self {
        let mut methods: Vec<Method> = VariantKind::baselines().into_iter().map(Method::Trained).collect();
        methods.push(Method::Lookup);
        methods.push(Method::Trained(VariantKind::Ct(ConstraintConfig::all())));
        let mut cells = Vec::new();
        for method in methods {
            for split in [SplitMode::ByPoint, SplitMode::ByFlamelet] {
                cells.push(AblationCell { method, p, split, fraction, repeats });
            }
        }
        Self { cells }
    }

    /// Appends the cells of `other` that are not already present.
    pub fn merge(mut self, other: AblationPlan) -> Self {
        for c in other.cells {
            if !self.cells.iter().any(|d| same_cell(d, &c)) {
                self.cells.push(c);
            }
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::Config("ablation plan has no cells".into()));
        }
        for c in &self.cells {
            if c.repeats == 0 {
                return Err(Error::Config(format!("cell {} needs at least one repeat", c.method)));
            }
        }
        Ok(())
    }
}

fn same_cell(a: &AblationCell, b: &AblationCell) -> bool {
    a.method.label() == b.method.label() && a.p == b.p && a.split == b.split && a.fraction.to_bits() == b.fraction.to_bits()
}

/// Shared training settings for every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationSettings {
    /// Architecture; `n_pv` is overridden per cell.
    pub spec: ModelSpec,
    pub control: TrainControl,
    /// Penalty weights used by every CT cell.
    pub lambdas: ConstraintConfig,
    pub fgm: FgmWeights,
    pub table_sizes: Vec<usize>,
    pub threads: usize,
}

impl Default for AblationSettings {
    fn default() -> Self {
        Self {
            spec: ModelSpec::default(),
            control: TrainControl::default(),
            lambdas: ConstraintConfig::all(),
            fgm: FgmWeights::default(),
            table_sizes: DEFAULT_TABLE_SIZES.to_vec(),
            threads: 1,
        }
    }
}

/// Worker count from `CHEMTAB_THREADS`, else the available parallelism.
pub fn thread_count() -> Result<usize> {
    parse_threads(std::env::var("CHEMTAB_THREADS").ok().as_deref())
}

pub(crate) fn parse_threads(value: Option<&str>) -> Result<usize> {
    match value {
        Some(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::Config(format!("CHEMTAB_THREADS must be a positive integer, got '{v}'"))),
        },
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// One aggregated cell of the result table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub split: SplitMode,
    pub fraction: f64,
    pub p: usize,
    /// Repeats that finished.
    pub seeds: usize,
    pub mae_mean: f64,
    pub mae_std: f64,
    pub mae_per_seed: Vec<f64>,
    /// Mean over seeds of each key-species MAE.
    pub key_mae_mean: Vec<(String, f64)>,
    /// Worst case over seeds; `None` for methods without an encoder report.
    pub conformity: Option<Conformity>,
    /// First error message when any repeat aborted.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn find(&self, method: &str, split: SplitMode, p: usize) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.method == method && r.split == split && r.p == p)
    }
}

/// Fits `method` on the train side of one split and scores the test side.
pub fn run_once(
    method: Method,
    p: usize,
    spec: &SplitSpec,
    ds: &Dataset,
    settings: &AblationSettings,
    model_seed: u64,
) -> Result<EvalReport> {
    let (train, test) = split(ds, spec)?;
    let mut report = match method {
        Method::Lookup => {
            let keys = settings.spec.resolve_key_species(ds.species_names())?;
            let table = LookupBaseline::fit(&train, &settings.fgm, &keys, &settings.table_sizes)?;
            evaluate(&table, &test)?
        }
        Method::Trained(kind) => {
            let (fit, val) = holdout(&train, settings.control.validation_fraction, derive_seed(model_seed, 7))?;
            let mspec = ModelSpec { n_pv: p, ..settings.spec.clone() };
            let model = make_variant(kind, &fit, &mspec, settings.lambdas, &settings.fgm, model_seed)?;
            let control = TrainControl { seed: derive_seed(model_seed, 8), ..settings.control };
            let (model, _) = train_model(model, &fit, &val, &control)?;
            evaluate(&model, &test)?
        }
    };
    report.split = Some(spec.mode);
    report.p = p;
    report.seed = model_seed;
    Ok(report)
}

/// Trains every cell `repeats` times. Repeat `r` uses the same split and
/// model seeds in every cell, so methods are compared on identical data.
/// Jobs run on up to `settings.threads` workers; the table is sorted by
/// method, split and p.
pub fn run_ablation(plan: &AblationPlan, ds: &Dataset, base_seed: u64, settings: &AblationSettings) -> Result<ResultTable> {
    plan.validate()?;
    let jobs: Vec<(usize, usize)> =
        plan.cells.iter().enumerate().flat_map(|(c, cell)| (0..cell.repeats).map(move |r| (c, r))).collect();
    let results: Mutex<Vec<Option<Result<EvalReport>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = settings.threads.clamp(1, jobs.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::SeqCst);
                if j >= jobs.len() {
                    break;
                }
                let (c, r) = jobs[j];
                let cell = &plan.cells[c];
                let out = SplitSpec::new(cell.split, cell.fraction, derive_seed(base_seed, 2 * r as u64)).and_then(
                    |spec| run_once(cell.method, cell.p, &spec, ds, settings, derive_seed(base_seed, 2 * r as u64 + 1)),
                );
                results.lock().expect("no worker panics while holding the lock")[j] = Some(out);
            });
        }
    });
    let results = results.into_inner().expect("workers finished");

    let mut rows = Vec::with_capacity(plan.cells.len());
    for (c, cell) in plan.cells.iter().enumerate() {
        let mut reports = Vec::new();
        let mut failure = None;
        for (j, &(jc, _)) in jobs.iter().enumerate() {
            if jc != c {
                continue;
            }
            match results[j].as_ref().expect("every job ran") {
                Ok(r) => reports.push(r.clone()),
                Err(e) => {
                    failure.get_or_insert_with(|| e.to_string());
                }
            }
        }
        rows.push(aggregate(cell, &reports, failure));
    }
    rows.sort_by(|a, b| {
        (a.method.as_str(), a.split, a.p, a.fraction.to_bits()).cmp(&(b.method.as_str(), b.split, b.p, b.fraction.to_bits()))
    });
    Ok(ResultTable { rows })
}

fn aggregate(cell: &AblationCell, reports: &[EvalReport], failure: Option<String>) -> ResultRow {
    let maes: Vec<f64> = reports.iter().map(|r| r.mae_source_energy).collect();
    let (mae_mean, mae_std) = mean_std(&maes);
    let key_mae_mean = reports
        .first()
        .map(|first| {
            first
                .mae_key
                .iter()
                .enumerate()
                .map(|(k, (name, _))| {
                    (name.clone(), reports.iter().map(|r| r.mae_key[k].1).sum::<f64>() / reports.len() as f64)
                })
                .collect()
        })
        .unwrap_or_default();
    let conformity = reports.iter().filter_map(|r| r.conformity).reduce(|a, b| Conformity {
        max_gram_off_diagonal: a.max_gram_off_diagonal.max(b.max_gram_off_diagonal),
        norm_min: a.norm_min.min(b.norm_min),
        norm_max: a.norm_max.max(b.norm_max),
        max_covariance_off_diagonal: a.max_covariance_off_diagonal.max(b.max_covariance_off_diagonal),
    });
    ResultRow {
        method: cell.method.label(),
        split: cell.split,
        fraction: cell.fraction,
        p: cell.p,
        seeds: reports.len(),
        mae_mean,
        mae_std,
        mae_per_seed: maes,
        key_mae_mean,
        conformity,
        failure,
    }
}
