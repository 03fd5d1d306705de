//! `key = value` run configuration. Blank lines and lines starting with `#`
//! are ignored, so a run manifest can be fed back in as a config file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::baselines::{FgmWeights, VariantKind, DEFAULT_TABLE_SIZES};
use crate::chemtab_model::{ConstraintConfig, ModelSpec, DEFAULT_KEY_SPECIES, DEFAULT_PV, TRUNK_WIDTHS};
use crate::dataset::{SplitMode, SplitSpec};
use crate::flamelet::{SolverOptions, SweepOptions};
use crate::nn::{derive_seed, TrainControl};
use crate::{Error, Result};

/// Stream ids under the master seed.
const STREAM_SPLIT: u64 = 1;
const STREAM_MODEL: u64 = 2;
const STREAM_HOLDOUT: u64 = 3;
const STREAM_TRAIN: u64 = 4;
const STREAM_ABLATION: u64 = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// `None` selects the bundled methane mechanism.
    pub mechanism: Option<PathBuf>,
    pub flames: usize,
    pub grid: usize,
    pub shrink: f64,
    pub domain_length: f64,
    pub extinction_threshold: f64,
    pub solver_tolerance: f64,
    pub max_pseudo_steps: usize,
    /// Dataset CSV; defaults to `<out>/dataset.csv`.
    pub dataset: Option<PathBuf>,
    /// Model checkpoint; defaults to `<out>/model.ckpt`.
    pub checkpoint: Option<PathBuf>,
    pub split: SplitMode,
    pub fraction: f64,
    pub variant: VariantKind,
    pub cpv: usize,
    pub trunk: Vec<usize>,
    pub dropout: f64,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub lambda_un: f64,
    pub lambda_wo: f64,
    pub lambda_ar: f64,
    pub key_species: Vec<String>,
    pub fgm_weights: FgmWeights,
    pub table_grid: Vec<usize>,
    pub repeats: usize,
    pub pv_sweep: Vec<usize>,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sweep = SweepOptions::default();
        let solver = SolverOptions::default();
        let control = TrainControl::default();
        let spec = ModelSpec::default();
        Self {
            mechanism: None,
            flames: sweep.n_flames,
            grid: 200,
            shrink: sweep.shrink,
            domain_length: 0.02,
            extinction_threshold: solver.extinction_threshold,
            solver_tolerance: solver.tolerance,
            max_pseudo_steps: solver.max_pseudo_steps,
            dataset: None,
            checkpoint: None,
            split: SplitMode::ByPoint,
            fraction: 0.5,
            variant: VariantKind::Ct(ConstraintConfig::all()),
            cpv: DEFAULT_PV,
            trunk: TRUNK_WIDTHS.to_vec(),
            dropout: spec.dropout,
            lr: control.learning_rate,
            batch: control.batch_size,
            epochs: control.max_epochs,
            patience: control.patience,
            validation_fraction: control.validation_fraction,
            lambda_un: 1.0,
            lambda_wo: 1.0,
            lambda_ar: 1.0,
            key_species: DEFAULT_KEY_SPECIES.iter().map(|s| s.to_string()).collect(),
            fgm_weights: FgmWeights::default(),
            table_grid: DEFAULT_TABLE_SIZES.to_vec(),
            repeats: 10,
            pv_sweep: vec![1, 2, 3, 4, 5],
            seed: 0,
            out: PathBuf::from("runs"),
        }
    }
}

fn bad(key: &str, value: &str, want: &str) -> Error {
    Error::Config(format!("{key} = '{value}': expected {want}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str, want: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value, want))
}

fn list<T: std::str::FromStr>(key: &str, value: &str, want: &str) -> Result<Vec<T>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| num(key, v.trim(), want)).collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl RunConfig {
    /// Sets one key. Unknown keys are an error so typos do not pass silently.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "mechanism" => self.mechanism = opt_path(v),
            "flames" => self.flames = num(key, v, "a count")?,
            "grid" => self.grid = num(key, v, "a count")?,
            "shrink" => self.shrink = num(key, v, "a number")?,
            "domain_length" => self.domain_length = num(key, v, "a length in m")?,
            "extinction_threshold" => self.extinction_threshold = num(key, v, "a temperature rise in K")?,
            "solver_tolerance" => self.solver_tolerance = num(key, v, "a number")?,
            "max_pseudo_steps" => self.max_pseudo_steps = num(key, v, "a count")?,
            "dataset" => self.dataset = opt_path(v),
            "checkpoint" => self.checkpoint = opt_path(v),
            "split" => self.split = v.parse()?,
            "fraction" => self.fraction = num(key, v, "a number in (0, 1)")?,
            "variant" => self.variant = v.parse()?,
            "cpv" => self.cpv = num(key, v, "a count")?,
            "trunk" => self.trunk = list(key, v, "comma-separated widths")?,
            "dropout" => self.dropout = num(key, v, "a probability")?,
            "lr" => self.lr = num(key, v, "a number")?,
            "batch" => self.batch = num(key, v, "a count")?,
            "epochs" => self.epochs = num(key, v, "a count")?,
            "patience" => self.patience = num(key, v, "a count")?,
            "validation_fraction" => self.validation_fraction = num(key, v, "a number in (0, 1)")?,
            "lambda_un" => self.lambda_un = num(key, v, "a number")?,
            "lambda_wo" => self.lambda_wo = num(key, v, "a number")?,
            "lambda_ar" => self.lambda_ar = num(key, v, "a number")?,
            "key_species" => self.key_species = list(key, v, "comma-separated species")?,
            "fgm_weights" => self.fgm_weights = FgmWeights::parse(v)?,
            "table_grid" => self.table_grid = list(key, v, "comma-separated node counts")?,
            "repeats" => self.repeats = num(key, v, "a count")?,
            "pv_sweep" => self.pv_sweep = list(key, v, "comma-separated PV counts")?,
            "seed" => self.seed = num(key, v, "an unsigned integer")?,
            "out" => self.out = PathBuf::from(v),
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i + 1, msg: format!("expected key = value, got '{line}'") })?;
            self.set(k.trim(), v).map_err(|e| match e {
                Error::Config(msg) => Error::Parse { line: i + 1, msg },
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        self.apply_text(&std::fs::read_to_string(path)?)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn set_long_run(&mut self) {
        self.epochs = TrainControl::LONG_RUN_EPOCHS;
    }

    /// Every key in a fixed order. Parsing the result gives back `self`.
    pub fn to_text(&self) -> String {
        let p = |o: &Option<PathBuf>| o.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let f = |v: f64| format!("{v:?}");
        let pairs: Vec<(&str, String)> = vec![
            ("mechanism", p(&self.mechanism)),
            ("flames", self.flames.to_string()),
            ("grid", self.grid.to_string()),
            ("shrink", f(self.shrink)),
            ("domain_length", f(self.domain_length)),
            ("extinction_threshold", f(self.extinction_threshold)),
            ("solver_tolerance", f(self.solver_tolerance)),
            ("max_pseudo_steps", self.max_pseudo_steps.to_string()),
            ("dataset", p(&self.dataset)),
            ("checkpoint", p(&self.checkpoint)),
            ("split", self.split.to_string()),
            ("fraction", f(self.fraction)),
            ("variant", self.variant.label()),
            ("cpv", self.cpv.to_string()),
            ("trunk", join(&self.trunk)),
            ("dropout", f(self.dropout)),
            ("lr", f(self.lr)),
            ("batch", self.batch.to_string()),
            ("epochs", self.epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("validation_fraction", f(self.validation_fraction)),
            ("lambda_un", f(self.lambda_un)),
            ("lambda_wo", f(self.lambda_wo)),
            ("lambda_ar", f(self.lambda_ar)),
            ("key_species", self.key_species.join(",")),
            ("fgm_weights", self.fgm_weights.describe()),
            ("table_grid", join(&self.table_grid)),
            ("repeats", self.repeats.to_string()),
            ("pv_sweep", join(&self.pv_sweep)),
            ("seed", self.seed.to_string()),
            ("out", self.out.display().to_string()),
        ];
        let mut s = String::new();
        for (k, v) in pairs {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Resolved config plus the derived seeds as comments.
    pub fn manifest(&self, command: &str) -> String {
        let mut s = format!("# chemtab {command} run manifest\n");
        s.push_str(&self.to_text());
        let seeds = self.seeds();
        let _ = writeln!(s, "# derived seed split = {}", seeds.split);
        let _ = writeln!(s, "# derived seed model = {}", seeds.model);
        let _ = writeln!(s, "# derived seed holdout = {}", seeds.holdout);
        let _ = writeln!(s, "# derived seed train = {}", seeds.train);
        let _ = writeln!(s, "# derived seed ablation = {}", seeds.ablation);
        s
    }

    pub fn write_manifest(&self, command: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out)?;
        let path = self.out.join(format!("{command}.manifest"));
        std::fs::write(&path, self.manifest(command))?;
        Ok(path)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(m) = &self.mechanism {
            if !m.exists() {
                return Err(Error::MissingArtifact(m.clone()));
            }
        }
        if self.flames == 0 {
            return Err(Error::Config("flames must be at least 1".into()));
        }
        if self.grid < 3 {
            return Err(Error::Config(format!("grid needs at least 3 points, got {}", self.grid)));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::Config(format!("shrink {} must lie in (0, 1)", self.shrink)));
        }
        if !(self.domain_length > 0.0) {
            return Err(Error::Config(format!("domain_length {} must be positive", self.domain_length)));
        }
        SplitSpec::new(self.split, self.fraction, 0).map_err(|e| Error::Config(e.to_string()))?;
        if self.cpv == 0 {
            return Err(Error::Config("cpv must be at least 1".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.pv_sweep.iter().any(|&p| p == 0) {
            return Err(Error::Config("pv_sweep entries must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} must lie in [0, 1)", self.dropout)));
        }
        self.lambdas().validate()?;
        self.control().validate()?;
        Ok(())
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.dataset.clone().unwrap_or_else(|| self.out.join("dataset.csv"))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| self.out.join("model.ckpt"))
    }

    pub fn seeds(&self) -> DerivedSeeds {
        DerivedSeeds {
            split: derive_seed(self.seed, STREAM_SPLIT),
            model: derive_seed(self.seed, STREAM_MODEL),
            holdout: derive_seed(self.seed, STREAM_HOLDOUT),
            train: derive_seed(self.seed, STREAM_TRAIN),
            ablation: derive_seed(self.seed, STREAM_ABLATION),
        }
    }

    pub fn sweep(&self) -> SweepOptions {
        SweepOptions { n_flames: self.flames, shrink: self.shrink }
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            tolerance: self.solver_tolerance,
            max_pseudo_steps: self.max_pseudo_steps,
            extinction_threshold: self.extinction_threshold,
            ..SolverOptions::default()
        }
    }

    pub fn split_spec(&self) -> Result<SplitSpec> {
        SplitSpec::new(self.split, self.fraction, self.seeds().split)
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            n_pv: self.cpv,
            trunk_widths: self.trunk.clone(),
            dropout: self.dropout,
            key_species: self.key_species.clone(),
        }
    }

    pub fn control(&self) -> TrainControl {
        TrainControl {
            max_epochs: self.epochs,
            batch_size: self.batch,
            patience: self.patience,
            learning_rate: self.lr,
            validation_fraction: self.validation_fraction,
            seed: self.seeds().train,
        }
    }

    /// Penalty weights; the flags come from the variant being trained.
    pub fn lambdas(&self) -> ConstraintConfig {
        ConstraintConfig::all().with_lambdas(self.lambda_un, self.lambda_wo, self.lambda_ar)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DerivedSeeds {
    pub split: u64,
    pub model: u64,
    pub holdout: u64,
    pub train: u64,
    pub ablation: u64,
}
