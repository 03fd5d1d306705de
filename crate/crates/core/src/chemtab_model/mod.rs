//! The ChemTab joint model.
//!
//! Mass fractions are divided by a per-column RMS scale and mapped to `p`
//! progress variables by a linear encoder `W` (no bias, no activation).
//! The mixture fraction is prepended as PV column 0 and the PV vector feeds
//! a ReLU trunk with two linear heads: `k` key-species source terms and the
//! source energy. Heads are trained on z-scored targets; [`ChemTabModel::predict`]
//! returns raw units.

mod io;
mod synthetic;
mod train;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::dataset::{ColumnStats, Dataset};
use crate::nn::{self, Activation, DenseLayer, Network, NetworkSpec};
use crate::{Error, Result};

pub use io::write_weights_csv;
pub use synthetic::{planted_dataset, random_orthonormal, PlantedTask};
pub use train::{holdout, train, train_model, train_model_logged, EpochRecord, TrainReport};

pub const DEFAULT_KEY_SPECIES: [&str; 7] = ["O2", "CO", "CO2", "H2O", "OH", "H2", "CH4"];

/// Trunk widths following the input `p + 1`.
pub const TRUNK_WIDTHS: [usize; 10] = [32, 64, 128, 256, 512, 256, 128, 64, 32, 8];

pub const DEFAULT_PV: usize = 4;

/// Which soft constraints are active and how strongly they are weighted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintConfig {
    pub un: bool,
    pub wo: bool,
    pub ar: bool,
    pub lambda_un: f64,
    pub lambda_wo: f64,
    pub lambda_ar: f64,
}

impl Default for ConstraintConfig {
    fn default() -> Self {
        Self::all()
    }
}

impl ConstraintConfig {
    pub fn all() -> Self {
        Self { un: true, wo: true, ar: true, lambda_un: 1.0, lambda_wo: 1.0, lambda_ar: 1.0 }
    }

    pub fn none() -> Self {
        Self { un: false, wo: false, ar: false, ..Self::all() }
    }

    /// The seven constraint subsets of the ablation study.
    pub fn ablation_variants() -> Vec<Self> {
        ["UN", "WO", "AR", "UN+WO", "UN+AR", "WO+AR", "ALL"]
            .iter()
            .map(|l| Self::parse(l).expect("static labels parse"))
            .collect()
    }

    /// Parses `ALL`, `NONE` or a `+`-joined subset such as `UN+AR`.
    pub fn parse(label: &str) -> Result<Self> {
        let label = label.trim().to_ascii_uppercase();
        match label.as_str() {
            "ALL" => return Ok(Self::all()),
            "NONE" | "" => return Ok(Self::none()),
            _ => {}
        }
        let mut c = Self::none();
        for part in label.split('+') {
            match part.trim() {
                "UN" => c.un = true,
                "WO" => c.wo = true,
                "AR" => c.ar = true,
                other => return Err(Error::Config(format!("unknown constraint '{other}' in '{label}'"))),
            }
        }
        Ok(c)
    }

    pub fn label(&self) -> String {
        match (self.un, self.wo, self.ar) {
            (true, true, true) => "ALL".into(),
            (false, false, false) => "NONE".into(),
            _ => {
                let parts: Vec<&str> = [(self.un, "UN"), (self.wo, "WO"), (self.ar, "AR")]
                    .iter()
                    .filter(|(on, _)| *on)
                    .map(|(_, n)| *n)
                    .collect();
                parts.join("+")
            }
        }
    }

    pub fn with_lambdas(mut self, un: f64, wo: f64, ar: f64) -> Self {
        self.lambda_un = un;
        self.lambda_wo = wo;
        self.lambda_ar = ar;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda_un", self.lambda_un), ("lambda_wo", self.lambda_wo), ("lambda_ar", self.lambda_ar)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be a nonnegative number, got {v}")));
            }
        }
        Ok(())
    }
}

/// Maps scaled mass fractions to progress variables.
#[derive(Debug, Clone, PartialEq)]
pub enum Encoder {
    /// `Yhat = X W` with `W` of shape `s x p`.
    Linear { w: Array2<f64>, trainable: bool },
    /// Nonlinear stand-in used only as a benchmark.
    Nonlinear(Network),
}

impl Encoder {
    pub fn n_in(&self) -> usize {
        match self {
            Encoder::Linear { w, .. } => w.nrows(),
            Encoder::Nonlinear(net) => net.n_in(),
        }
    }

    pub fn n_pv(&self) -> usize {
        match self {
            Encoder::Linear { w, .. } => w.ncols(),
            Encoder::Nonlinear(net) => net.n_out(),
        }
    }

    pub fn weights(&self) -> Option<&Array2<f64>> {
        match self {
            Encoder::Linear { w, .. } => Some(w),
            Encoder::Nonlinear(_) => None,
        }
    }

    pub fn is_trainable(&self) -> bool {
        !matches!(self, Encoder::Linear { trainable: false, .. })
    }

    fn encode(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        match self {
            Encoder::Linear { w, .. } => embed(x, w.view()),
            Encoder::Nonlinear(net) => net.forward(x),
        }
    }
}

/// Normalization owned by a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelNorm {
    /// Per-species RMS divisor applied before the encoder.
    pub y_scale: Vec<f64>,
    pub energy: ColumnStats,
    pub key: ColumnStats,
}

impl ModelNorm {
    pub fn identity(n_species: usize, n_key: usize) -> Self {
        let unit = |n: usize| ColumnStats { center: vec![0.0; n], scale: vec![1.0; n], constant: vec![false; n] };
        Self { y_scale: vec![1.0; n_species], energy: unit(1), key: unit(n_key) }
    }

    pub fn fit(ds: &Dataset, key_columns: &[usize]) -> Result<Self> {
        if ds.n_rows() < 2 {
            return Err(Error::InputDomain(format!("model normalization needs at least 2 rows, got {}", ds.n_rows())));
        }
        let n = ds.n_rows() as f64;
        let y_scale = ds
            .y()
            .axis_iter(Axis(1))
            .map(|c| {
                let rms = (c.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
                if rms > 0.0 && rms.is_finite() {
                    rms
                } else {
                    1.0
                }
            })
            .collect();
        let key = ColumnStats::fit(ds.sdot().select(Axis(1), key_columns).view());
        Ok(Self { y_scale, energy: ColumnStats::fit_vector(ds.source_energy().view()), key })
    }
}

/// Architecture of a ChemTab model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub n_pv: usize,
    pub trunk_widths: Vec<usize>,
    pub dropout: f64,
    pub key_species: Vec<String>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            n_pv: DEFAULT_PV,
            trunk_widths: TRUNK_WIDTHS.to_vec(),
            dropout: 0.05,
            key_species: DEFAULT_KEY_SPECIES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl ModelSpec {
    /// Requested key species that the dataset actually carries; the rest are
    /// dropped with a warning on standard error.
    pub fn resolve_key_species(&self, available: &[String]) -> Result<Vec<String>> {
        let mut keep = Vec::new();
        for name in &self.key_species {
            if available.iter().any(|a| a == name) {
                keep.push(name.clone());
            } else {
                eprintln!("warning: key species {name} is not in the mechanism and is skipped");
            }
        }
        if keep.is_empty() {
            return Err(Error::Config("none of the key species are present".into()));
        }
        Ok(keep)
    }

    pub fn validate(&self, n_species: usize) -> Result<()> {
        if self.n_pv == 0 || self.n_pv >= n_species {
            return Err(Error::Config(format!(
                "number of progress variables must lie in 1..{n_species}, got {}",
                self.n_pv
            )));
        }
        if self.trunk_widths.contains(&0) {
            return Err(Error::Config("trunk widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        Ok(())
    }
}

/// Raw-unit rows for loss evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub y: Array2<f64>,
    pub z: Array1<f64>,
    pub energy: Array1<f64>,
    pub key: Array2<f64>,
}

impl Batch {
    pub fn n_rows(&self) -> usize {
        self.z.len()
    }

    pub fn select(&self, rows: &[usize]) -> Batch {
        Batch {
            y: self.y.select(Axis(0), rows),
            z: self.z.select(Axis(0), rows),
            energy: self.energy.select(Axis(0), rows),
            key: self.key.select(Axis(0), rows),
        }
    }
}

/// Loss terms of one evaluation. Penalties are unweighted and are zero when
/// their flag is off; `total` applies the weights.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub energy: f64,
    pub key: f64,
    pub un: f64,
    pub wo: f64,
    pub ar: f64,
    pub total: f64,
}

/// Predictions in raw units.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub energy: Array1<f64>,
    /// `n x k`, columns in [`ChemTabModel::key_species`] order.
    pub key: Array2<f64>,
}

/// Gradient blocks in the order of [`ChemTabModel::param_blocks_mut`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGradients {
    pub encoder: Vec<Array2<f64>>,
    pub encoder_bias: Vec<Array1<f64>>,
    pub trunk: nn::Gradients,
    pub head_key: nn::Gradients,
    pub head_energy: nn::Gradients,
}

impl ModelGradients {
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for (i, w) in self.encoder.iter().enumerate() {
            out.push(w.as_slice().expect("standard layout"));
            if let Some(b) = self.encoder_bias.get(i) {
                out.push(b.as_slice().expect("standard layout"));
            }
        }
        out.extend(self.trunk.blocks());
        out.extend(self.head_key.blocks());
        out.extend(self.head_energy.blocks());
        out
    }
}

/// Conformity of a trained model: column norms and Gram matrix of `W`
/// (absent for a nonlinear encoder) and the PV covariance over a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    pub column_norms: Option<Vec<f64>>,
    pub gram: Option<Array2<f64>>,
    pub pv_covariance: Array2<f64>,
}

impl ConstraintReport {
    pub fn norm_range(&self) -> Option<(f64, f64)> {
        self.column_norms.as_ref().map(|n| {
            (n.iter().cloned().fold(f64::INFINITY, f64::min), n.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        })
    }

    pub fn max_gram_off_diagonal(&self) -> Option<f64> {
        self.gram.as_ref().map(max_off_diagonal)
    }

    pub fn max_covariance_off_diagonal(&self) -> f64 {
        max_off_diagonal(&self.pv_covariance)
    }
}

fn max_off_diagonal(m: &Array2<f64>) -> f64 {
    let mut worst = 0.0f64;
    for ((i, j), v) in m.indexed_iter() {
        if i != j {
            worst = worst.max(v.abs());
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChemTabModel {
    pub species: Vec<String>,
    pub key_species: Vec<String>,
    pub encoder: Encoder,
    pub trunk: Network,
    pub head_key: Network,
    pub head_energy: Network,
    pub constraints: ConstraintConfig,
    pub norm: ModelNorm,
    /// Method name carried into reports, e.g. `CT(ALL)`.
    pub label: String,
}

/// `Yhat = Y W`.
pub fn embed(y: ArrayView2<'_, f64>, w: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if y.ncols() != w.nrows() {
        return Err(Error::Dimension(format!("Y has {} columns but W has {} rows", y.ncols(), w.nrows())));
    }
    Ok(y.dot(&w))
}

/// Prepends the mixture fraction as column 0.
pub fn concat_zmix(yhat: ArrayView2<'_, f64>, z: ArrayView1<'_, f64>) -> Result<Array2<f64>> {
    if yhat.nrows() != z.len() {
        return Err(Error::Dimension(format!("{} embedded rows but {} mixture fractions", yhat.nrows(), z.len())));
    }
    let mut pv = Array2::zeros((z.len(), yhat.ncols() + 1));
    pv.column_mut(0).assign(&z);
    pv.slice_mut(s![.., 1..]).assign(&yhat);
    Ok(pv)
}

pub fn penalty_un(w: ArrayView2<'_, f64>) -> f64 {
    w.axis_iter(Axis(1)).map(|c| (c.dot(&c).sqrt() - 1.0).powi(2)).sum()
}

pub fn penalty_un_grad(w: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut g = Array2::zeros(w.raw_dim());
    for (j, c) in w.axis_iter(Axis(1)).enumerate() {
        let norm = c.dot(&c).sqrt();
        if norm > 0.0 {
            g.column_mut(j).assign(&(&c * (2.0 * (norm - 1.0) / norm)));
        }
    }
    g
}

fn gram_minus_identity(w: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut g = w.t().dot(&w);
    for i in 0..g.nrows() {
        g[(i, i)] -= 1.0;
    }
    g
}

pub fn penalty_wo(w: ArrayView2<'_, f64>) -> f64 {
    gram_minus_identity(w).iter().map(|v| v * v).sum()
}

pub fn penalty_wo_grad(w: ArrayView2<'_, f64>) -> Array2<f64> {
    w.dot(&gram_minus_identity(w)) * 4.0
}

/// Population covariance of the columns (centered per call, divided by `n`).
pub fn covariance(m: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let n = m.nrows();
    if n < 2 {
        return Err(Error::InputDomain(format!("covariance needs at least 2 rows, got {n}")));
    }
    let centered = centered(m);
    Ok(centered.t().dot(&centered) / n as f64)
}

fn centered(m: ArrayView2<'_, f64>) -> Array2<f64> {
    let mean = m.mean_axis(Axis(0)).expect("nonempty");
    &m - &mean
}

pub fn penalty_ar(pv: ArrayView2<'_, f64>) -> Result<f64> {
    let c = covariance(pv)?;
    Ok(c.indexed_iter().filter(|((i, j), _)| i != j).map(|(_, v)| v * v).sum())
}

pub fn penalty_ar_grad(pv: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let n = pv.nrows();
    let mut c = covariance(pv)?;
    for i in 0..c.nrows() {
        c[(i, i)] = 0.0;
    }
    Ok(centered(pv).dot(&c) * (4.0 / n as f64))
}

fn mean_abs(pred: ArrayView1<'_, f64>, target: ArrayView1<'_, f64>) -> f64 {
    pred.iter().zip(target).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl ChemTabModel {
    /// Fresh model with normalization fitted on `ds` and Glorot-uniform
    /// weights for the encoder, trunk and heads.
    pub fn init(ds: &Dataset, spec: &ModelSpec, constraints: ConstraintConfig, seed: u64) -> Result<Self> {
        let s = ds.n_species();
        spec.validate(s)?;
        constraints.validate()?;
        let key_species = spec.resolve_key_species(ds.species_names())?;
        let key_columns = key_columns(ds.species_names(), &key_species)?;
        let norm = ModelNorm::fit(ds, &key_columns)?;
        let encoder_net = nn::init_uniform(
            &NetworkSpec { sizes: vec![s, spec.n_pv], activations: vec![Activation::Linear], dropout: 0.0 },
            nn::derive_seed(seed, 0),
        )?;
        // DenseLayer stores `out x in`; the encoder stores `s x p`.
        let w = encoder_net.layers[0].w.t().as_standard_layout().into_owned();
        let (trunk, head_key, head_energy) = init_regressor(spec, key_species.len(), seed)?;
        Ok(Self {
            species: ds.species_names().to_vec(),
            key_species,
            encoder: Encoder::Linear { w, trainable: true },
            trunk,
            head_key,
            head_energy,
            constraints,
            norm,
            label: format!("CT({})", constraints.label()),
        })
    }

    pub fn n_pv(&self) -> usize {
        self.encoder.n_pv()
    }

    /// Swaps in a different encoder; its PV count must match the trunk.
    pub fn replace_encoder(&mut self, encoder: Encoder) -> Result<()> {
        if encoder.n_in() != self.species.len() {
            return Err(Error::Dimension(format!(
                "encoder takes {} species, model has {}",
                encoder.n_in(),
                self.species.len()
            )));
        }
        if encoder.n_pv() + 1 != self.trunk.n_in() {
            return Err(Error::Dimension(format!(
                "encoder yields {} PVs but the trunk expects {}",
                encoder.n_pv(),
                self.trunk.n_in() - 1
            )));
        }
        self.encoder = match encoder {
            Encoder::Linear { w, trainable } => Encoder::Linear { w: w.as_standard_layout().into_owned(), trainable },
            other => other,
        };
        Ok(())
    }

    /// Raw-unit rows of `ds` (all rows when `rows` is `None`).
    pub fn batch(&self, ds: &Dataset, rows: Option<&[usize]>) -> Result<Batch> {
        if ds.species_names() != self.species.as_slice() {
            return Err(Error::Dimension(format!(
                "dataset species {:?} do not match model species {:?}",
                ds.species_names(),
                self.species
            )));
        }
        let cols = key_columns(ds.species_names(), &self.key_species)?;
        let all: Vec<usize>;
        let rows = match rows {
            Some(r) => r,
            None => {
                all = (0..ds.n_rows()).collect();
                &all
            }
        };
        Ok(Batch {
            y: ds.y().select(Axis(0), rows),
            z: ds.z_mix().select(Axis(0), rows),
            energy: ds.source_energy().select(Axis(0), rows),
            key: ds.sdot().select(Axis(0), rows).select(Axis(1), &cols),
        })
    }

    fn scale_inputs(&self, y: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if y.ncols() != self.species.len() {
            return Err(Error::Dimension(format!("model expects {} species, got {}", self.species.len(), y.ncols())));
        }
        let mut x = y.to_owned();
        for (mut col, s) in x.axis_iter_mut(Axis(1)).zip(&self.norm.y_scale) {
            col.mapv_inplace(|v| v / s);
        }
        Ok(x)
    }

    /// Progress variables for raw mass fractions.
    pub fn encode(&self, y: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.encoder.encode(self.scale_inputs(y)?.view())
    }

    /// `Z_mix` followed by the encoded progress variables.
    pub fn pv(&self, y: ArrayView2<'_, f64>, z: ArrayView1<'_, f64>) -> Result<Array2<f64>> {
        concat_zmix(self.encode(y)?.view(), z)
    }

    /// Eval-mode prediction in raw units.
    pub fn predict(&self, y: ArrayView2<'_, f64>, z: ArrayView1<'_, f64>) -> Result<Prediction> {
        let h = self.trunk.forward(self.pv(y, z)?.view())?;
        let e = self.head_energy.forward(h.view())?;
        let k = self.head_key.forward(h.view())?;
        Ok(Prediction { energy: self.norm.energy.invert_vector(e.column(0)), key: self.norm.key.invert(k.view()) })
    }

    pub fn predict_dataset(&self, ds: &Dataset) -> Result<Prediction> {
        if ds.species_names() != self.species.as_slice() {
            return Err(Error::Dimension("dataset species do not match the model".into()));
        }
        self.predict(ds.y().view(), ds.z_mix().view())
    }

    fn penalties(&self, pv: ArrayView2<'_, f64>) -> Result<LossBreakdown> {
        let c = &self.constraints;
        let mut out = LossBreakdown::default();
        if let Some(w) = self.encoder.weights() {
            if c.un {
                out.un = penalty_un(w.view());
            }
            if c.wo {
                out.wo = penalty_wo(w.view());
            }
        }
        if c.ar {
            out.ar = penalty_ar(pv)?;
        }
        Ok(out)
    }

    fn finish_total(&self, mut l: LossBreakdown) -> LossBreakdown {
        let c = &self.constraints;
        l.total = l.energy + l.key;
        if c.un {
            l.total += c.lambda_un * l.un;
        }
        if c.wo {
            l.total += c.lambda_wo * l.wo;
        }
        if c.ar {
            l.total += c.lambda_ar * l.ar;
        }
        l
    }

    fn normalized_targets(&self, batch: &Batch) -> (Array1<f64>, Array2<f64>) {
        (self.norm.energy.apply_vector(batch.energy.view()), self.norm.key.apply(batch.key.view()))
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.key.ncols() != self.key_species.len() {
            return Err(Error::Config(format!(
                "batch carries {} key-species columns, model needs {}",
                batch.key.ncols(),
                self.key_species.len()
            )));
        }
        if batch.n_rows() == 0 {
            return Err(Error::InputDomain("empty batch".into()));
        }
        Ok(())
    }

    /// Eval-mode loss on normalized targets.
    pub fn loss(&self, batch: &Batch) -> Result<LossBreakdown> {
        self.check_batch(batch)?;
        let pv = self.pv(batch.y.view(), batch.z.view())?;
        let h = self.trunk.forward(pv.view())?;
        let e = self.head_energy.forward(h.view())?;
        let k = self.head_key.forward(h.view())?;
        let (te, tk) = self.normalized_targets(batch);
        let mut l = self.penalties(pv.view())?;
        l.energy = mean_abs(e.column(0), te.view());
        let nk = tk.ncols() as f64;
        l.key = (0..tk.ncols()).map(|j| mean_abs(k.column(j), tk.column(j))).sum::<f64>() / nk;
        Ok(self.finish_total(l))
    }

    /// Loss and its gradient with respect to every trainable block. Dropout
    /// is applied in the trunk when `rng` is given.
    pub fn loss_and_gradients<R: Rng>(
        &mut self,
        batch: &Batch,
        rng: Option<&mut R>,
    ) -> Result<(LossBreakdown, ModelGradients)> {
        self.check_batch(batch)?;
        let n = batch.n_rows() as f64;
        let x = self.scale_inputs(batch.y.view())?;
        let yhat = match &mut self.encoder {
            Encoder::Linear { w, .. } => embed(x.view(), w.view())?,
            Encoder::Nonlinear(net) => net.forward_train::<R>(x.view(), None)?,
        };
        let pv = concat_zmix(yhat.view(), batch.z.view())?;
        let h = self.trunk.forward_train(pv.view(), rng)?;
        let e = self.head_energy.forward_train::<R>(h.view(), None)?;
        let k = self.head_key.forward_train::<R>(h.view(), None)?;
        let (te, tk) = self.normalized_targets(batch);
        let nk = tk.ncols() as f64;

        let mut l = self.penalties(pv.view())?;
        l.energy = mean_abs(e.column(0), te.view());
        l.key = (0..tk.ncols()).map(|j| mean_abs(k.column(j), tk.column(j))).sum::<f64>() / nk;
        let l = self.finish_total(l);

        let ge = Array2::from_shape_fn(e.raw_dim(), |(i, _)| sign(e[(i, 0)] - te[i]) / n);
        let gk = Array2::from_shape_fn(k.raw_dim(), |(i, j)| sign(k[(i, j)] - tk[(i, j)]) / (n * nk));
        let head_energy = self.head_energy.backward(ge.view())?;
        let head_key = self.head_key.backward(gk.view())?;
        let gh = &head_energy.input + &head_key.input;
        let trunk = self.trunk.backward(gh.view())?;
        let mut gpv = trunk.input.clone();
        let c = self.constraints;
        if c.ar {
            gpv.scaled_add(c.lambda_ar, &penalty_ar_grad(pv.view())?);
        }
        let gyhat = gpv.slice(s![.., 1..]);
        let (encoder, encoder_bias) = match &self.encoder {
            Encoder::Linear { trainable: false, .. } => (Vec::new(), Vec::new()),
            Encoder::Linear { w, .. } => {
                let mut gw = x.t().dot(&gyhat).as_standard_layout().into_owned();
                if c.un {
                    gw.scaled_add(c.lambda_un, &penalty_un_grad(w.view()));
                }
                if c.wo {
                    gw.scaled_add(c.lambda_wo, &penalty_wo_grad(w.view()));
                }
                (vec![gw], Vec::new())
            }
            Encoder::Nonlinear(net) => {
                let g = net.backward(gyhat)?;
                (g.w, g.b)
            }
        };
        Ok((l, ModelGradients { encoder, encoder_bias, trunk, head_key, head_energy }))
    }

    /// Trainable parameter blocks: encoder, trunk, key head, energy head.
    pub fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        match &mut self.encoder {
            Encoder::Linear { trainable: false, .. } => {}
            Encoder::Linear { w, .. } => out.push(w.as_slice_mut().expect("standard layout")),
            Encoder::Nonlinear(net) => out.extend(net.param_blocks_mut()),
        }
        out.extend(self.trunk.param_blocks_mut());
        out.extend(self.head_key.param_blocks_mut());
        out.extend(self.head_energy.param_blocks_mut());
        out
    }

    pub fn clear_caches(&mut self) {
        if let Encoder::Nonlinear(net) = &mut self.encoder {
            net.clear_cache();
        }
        self.trunk.clear_cache();
        self.head_key.clear_cache();
        self.head_energy.clear_cache();
    }

    pub fn constraint_report(&self, ds: &Dataset) -> Result<ConstraintReport> {
        let pv = self.pv(ds.y().view(), ds.z_mix().view())?;
        let (column_norms, gram) = match self.encoder.weights() {
            Some(w) => (
                Some(w.axis_iter(Axis(1)).map(|c| c.dot(&c).sqrt()).collect()),
                Some(w.t().dot(w)),
            ),
            None => (None, None),
        };
        Ok(ConstraintReport { column_norms, gram, pv_covariance: covariance(pv.view())? })
    }
}

fn key_columns(species: &[String], key: &[String]) -> Result<Vec<usize>> {
    key.iter()
        .map(|k| {
            species
                .iter()
                .position(|s| s == k)
                .ok_or_else(|| Error::Config(format!("key species {k} is missing from the dataset")))
        })
        .collect()
}

fn init_regressor(spec: &ModelSpec, n_key: usize, seed: u64) -> Result<(Network, Network, Network)> {
    let mut sizes = vec![spec.n_pv + 1];
    sizes.extend(&spec.trunk_widths);
    let trunk = if spec.trunk_widths.is_empty() {
        // No hidden layers: an identity trunk hands the PVs straight to the heads.
        let d = spec.n_pv + 1;
        Network::from_layers(
            vec![DenseLayer { w: Array2::eye(d), b: Array1::zeros(d), activation: Activation::Linear }],
            0.0,
        )?
    } else {
        let activations = vec![Activation::Relu; spec.trunk_widths.len()];
        nn::init_uniform(&NetworkSpec { sizes: sizes.clone(), activations, dropout: spec.dropout }, nn::derive_seed(seed, 1))?
    };
    let last = *sizes.last().expect("nonempty");
    let linear = |out: usize, stream: u64| {
        nn::init_uniform(
            &NetworkSpec { sizes: vec![last, out], activations: vec![Activation::Linear], dropout: 0.0 },
            nn::derive_seed(seed, stream),
        )
    };
    Ok((trunk, linear(n_key, 2)?, linear(1, 3)?))
}
