//! Comparison methods: PCA progress variables, fixed classical progress
//! variables, unconstrained and nonlinear encoders, and a structured-grid
//! lookup table.

mod lookup;
mod pca;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};

use crate::chemtab_model::{ChemTabModel, ConstraintConfig, Encoder, ModelSpec, Prediction};
use crate::dataset::Dataset;
use crate::nn::{self, NetworkSpec};
use crate::{Error, Result};

pub use lookup::{LookupTable, MAX_DIMS};
pub use pca::{pca_fit, PcaBasis};

/// Hidden width of the nonlinear encoder benchmark.
pub const NL_ENCODER_WIDTH: usize = 16;

/// Default table resolution for two progress variables.
pub const DEFAULT_TABLE_SIZES: [usize; 2] = [200, 100];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VariantKind {
    /// Fixed progress variable: weighted sum of major products.
    FgmCpvg,
    /// Frozen PCA directions.
    PcaPvg,
    /// Small nonlinear network in place of `W`.
    NlEnc,
    /// Trainable `W` without penalties.
    UlEnc,
    /// ChemTab with the given constraint subset.
    Ct(ConstraintConfig),
}

impl VariantKind {
    pub fn label(&self) -> String {
        match self {
            VariantKind::FgmCpvg => "FGM_CPVG".into(),
            VariantKind::PcaPvg => "PCA_PVG".into(),
            VariantKind::NlEnc => "NL_ENC".into(),
            VariantKind::UlEnc => "UL_ENC".into(),
            VariantKind::Ct(c) => format!("CT({})", c.label()),
        }
    }

    pub fn baselines() -> Vec<VariantKind> {
        vec![VariantKind::PcaPvg, VariantKind::UlEnc, VariantKind::NlEnc, VariantKind::FgmCpvg]
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for VariantKind {
    type Err = Error;

    /// Accepts `FGM_CPVG`, `PCA_PVG`, `NL_ENC`, `UL_ENC`, `CT`, `CT-ALL`,
    /// `CT(UN+WO)` and similar; `-` and `_` are interchangeable.
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        match norm.as_str() {
            "FGM_CPVG" | "FGM" => return Ok(VariantKind::FgmCpvg),
            "PCA_PVG" | "PCA" => return Ok(VariantKind::PcaPvg),
            "NL_ENC" => return Ok(VariantKind::NlEnc),
            "UL_ENC" => return Ok(VariantKind::UlEnc),
            "CT" => return Ok(VariantKind::Ct(ConstraintConfig::all())),
            _ => {}
        }
        let flags = norm
            .strip_prefix("CT_")
            .or_else(|| norm.strip_prefix("CT(").and_then(|r| r.strip_suffix(')')))
            .ok_or_else(|| Error::Config(format!("unknown variant '{s}'")))?;
        Ok(VariantKind::Ct(ConstraintConfig::parse(flags)?))
    }
}

/// Species weights of the fixed progress variable.
#[derive(Debug, Clone, PartialEq)]
pub struct FgmWeights(pub Vec<(String, f64)>);

impl Default for FgmWeights {
    fn default() -> Self {
        Self(["CO2", "H2O", "CO", "H2"].iter().map(|s| (s.to_string(), 1.0)).collect())
    }
}

impl FgmWeights {
    /// Parses `CO2:1,H2O:1`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut out = Vec::new();
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            let (name, w) = part
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("FGM weight '{part}' is not name:value")))?;
            let w: f64 = w.trim().parse().map_err(|_| Error::Config(format!("bad FGM weight in '{part}'")))?;
            out.push((name.trim().to_string(), w));
        }
        if out.is_empty() {
            return Err(Error::Config("FGM weights are empty".into()));
        }
        Ok(Self(out))
    }

    pub fn describe(&self) -> String {
        self.0.iter().map(|(n, w)| format!("{n}:{w}")).collect::<Vec<_>>().join(",")
    }

    /// Weight per species column; species not in the list get 0.
    pub fn column(&self, species: &[String]) -> Result<Array1<f64>> {
        let mut col = Array1::zeros(species.len());
        for (name, w) in &self.0 {
            let i = species
                .iter()
                .position(|s| s == name)
                .ok_or_else(|| Error::Config(format!("FGM species {name} is not in the dataset")))?;
            col[i] = *w;
        }
        Ok(col)
    }

    pub fn progress(&self, ds: &Dataset) -> Result<Array1<f64>> {
        Ok(ds.y().dot(&self.column(ds.species_names())?))
    }
}

/// Builds an untrained pipeline for `kind` on the shared regressor
/// architecture. Normalization is fitted on `train`.
pub fn make_variant(
    kind: VariantKind,
    train: &Dataset,
    spec: &ModelSpec,
    lambdas: ConstraintConfig,
    fgm: &FgmWeights,
    seed: u64,
) -> Result<ChemTabModel> {
    let with = |flags: ConstraintConfig| ConstraintConfig { un: flags.un, wo: flags.wo, ar: flags.ar, ..lambdas };
    let mut model = match kind {
        VariantKind::Ct(flags) => ChemTabModel::init(train, spec, with(flags), seed)?,
        VariantKind::UlEnc => ChemTabModel::init(train, spec, with(ConstraintConfig::none()), seed)?,
        VariantKind::PcaPvg => {
            let mut m = ChemTabModel::init(train, spec, with(ConstraintConfig::none()), seed)?;
            let x = scaled(train, &m.norm.y_scale);
            // The PCA mean shift is a constant offset absorbed by the first trunk bias.
            let basis = pca_fit(x.view(), spec.n_pv)?;
            m.replace_encoder(Encoder::Linear { w: basis.components, trainable: false })?;
            m
        }
        VariantKind::NlEnc => {
            let mut m = ChemTabModel::init(train, spec, with(ConstraintConfig::none()), seed)?;
            let enc = nn::init_uniform(
                &NetworkSpec::mlp(&[train.n_species(), NL_ENCODER_WIDTH, spec.n_pv], 0.0),
                nn::derive_seed(seed, 4),
            )?;
            m.replace_encoder(Encoder::Nonlinear(enc))?;
            m
        }
        VariantKind::FgmCpvg => {
            let one = ModelSpec { n_pv: 1, ..spec.clone() };
            let mut m = ChemTabModel::init(train, &one, with(ConstraintConfig::none()), seed)?;
            // The encoder sees Y divided by y_scale, so the scale is folded back in.
            let col = fgm.column(train.species_names())? * &Array1::from(m.norm.y_scale.clone());
            m.replace_encoder(Encoder::Linear { w: col.insert_axis(Axis(1)), trainable: false })?;
            m
        }
    };
    model.label = kind.label();
    Ok(model)
}

fn scaled(ds: &Dataset, scale: &[f64]) -> Array2<f64> {
    let mut x = ds.y().clone();
    for (mut c, s) in x.axis_iter_mut(Axis(1)).zip(scale) {
        c.mapv_inplace(|v| v / s);
    }
    x
}

/// Two-PV tabulation over `(Z_mix, C_pv)` of source energy and key-species
/// source terms.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupBaseline {
    pub table: LookupTable,
    pub fgm: FgmWeights,
    pub species: Vec<String>,
    pub key_species: Vec<String>,
}

impl LookupBaseline {
    pub fn fit(train: &Dataset, fgm: &FgmWeights, key_species: &[String], sizes: &[usize]) -> Result<Self> {
        let pv = Self::pv_of(train, fgm)?;
        let values = targets(train, key_species)?;
        Ok(Self {
            table: LookupTable::build(pv.view(), values.view(), sizes)?,
            fgm: fgm.clone(),
            species: train.species_names().to_vec(),
            key_species: key_species.to_vec(),
        })
    }

    fn pv_of(ds: &Dataset, fgm: &FgmWeights) -> Result<Array2<f64>> {
        let c = fgm.progress(ds)?;
        Ok(ndarray::stack![Axis(1), ds.z_mix().view(), c.view()])
    }

    pub fn predict_dataset(&self, ds: &Dataset) -> Result<Prediction> {
        if ds.species_names() != self.species.as_slice() {
            return Err(Error::Dimension("dataset species do not match the table".into()));
        }
        let out = self.table.lookup_batch(Self::pv_of(ds, &self.fgm)?.view())?;
        Ok(Prediction { energy: out.column(0).to_owned(), key: out.slice(ndarray::s![.., 1..]).to_owned() })
    }
}

/// `[source_energy, key species...]` per row.
fn targets(ds: &Dataset, key_species: &[String]) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((ds.n_rows(), key_species.len() + 1));
    out.column_mut(0).assign(ds.source_energy());
    for (j, k) in key_species.iter().enumerate() {
        let i = ds.species_index(k).ok_or_else(|| Error::Config(format!("key species {k} is missing")))?;
        out.column_mut(j + 1).assign(&ds.sdot().column(i));
    }
    Ok(out)
}
