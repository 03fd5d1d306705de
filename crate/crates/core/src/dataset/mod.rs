//! Stacked flamelet rows: mass fractions, source terms, mixture fraction
//! and source energy, each row tagged with the flame key it came from.

mod csv_io;
mod norm;
mod split;

use ndarray::{Array1, Array2, Axis};

use crate::{Error, Result};

pub use csv_io::{fmt_f64, read_csv, write_csv, write_metadata, DatasetMetadata};
pub use norm::{apply_norm, fit_norm, ColumnStats, NormStats};
pub use split::{split, split_indices, write_split_manifest, SplitMode, SplitSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    species_names: Vec<String>,
    flame_key: Array1<f64>,
    x: Array1<f64>,
    z_mix: Array1<f64>,
    temperature: Array1<f64>,
    y: Array2<f64>,
    sdot: Array2<f64>,
    source_energy: Array1<f64>,
}

/// Column data used to build a [`Dataset`].
#[derive(Debug, Clone, Default)]
pub struct DatasetColumns {
    pub flame_key: Vec<f64>,
    pub x: Vec<f64>,
    pub z_mix: Vec<f64>,
    pub temperature: Vec<f64>,
    pub y: Vec<f64>,
    pub sdot: Vec<f64>,
    pub source_energy: Vec<f64>,
}

impl Dataset {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        species_names: Vec<String>,
        flame_key: Array1<f64>,
        x: Array1<f64>,
        z_mix: Array1<f64>,
        temperature: Array1<f64>,
        y: Array2<f64>,
        sdot: Array2<f64>,
        source_energy: Array1<f64>,
    ) -> Result<Self> {
        let n = flame_key.len();
        let s = species_names.len();
        let lens = [x.len(), z_mix.len(), temperature.len(), source_energy.len(), y.nrows(), sdot.nrows()];
        if lens.iter().any(|&l| l != n) {
            return Err(Error::Dimension(format!("row counts disagree: flame_key {n}, others {lens:?}")));
        }
        if y.ncols() != s || sdot.ncols() != s {
            return Err(Error::Dimension(format!(
                "{s} species names but Y has {} and Sdot {} columns",
                y.ncols(),
                sdot.ncols()
            )));
        }
        Ok(Self { species_names, flame_key, x, z_mix, temperature, y, sdot, source_energy })
    }

    pub fn from_columns(species_names: Vec<String>, cols: DatasetColumns) -> Result<Self> {
        let n = cols.flame_key.len();
        let s = species_names.len();
        if cols.y.len() != n * s || cols.sdot.len() != n * s {
            return Err(Error::Dimension(format!(
                "expected {} mass-fraction and source entries, got {} and {}",
                n * s,
                cols.y.len(),
                cols.sdot.len()
            )));
        }
        let y = Array2::from_shape_vec((n, s), cols.y).map_err(|e| Error::Dimension(e.to_string()))?;
        let sdot = Array2::from_shape_vec((n, s), cols.sdot).map_err(|e| Error::Dimension(e.to_string()))?;
        Self::new(
            species_names,
            Array1::from(cols.flame_key),
            Array1::from(cols.x),
            Array1::from(cols.z_mix),
            Array1::from(cols.temperature),
            y,
            sdot,
            Array1::from(cols.source_energy),
        )
    }

    pub fn empty(species_names: Vec<String>) -> Self {
        let s = species_names.len();
        Self {
            species_names,
            flame_key: Array1::zeros(0),
            x: Array1::zeros(0),
            z_mix: Array1::zeros(0),
            temperature: Array1::zeros(0),
            y: Array2::zeros((0, s)),
            sdot: Array2::zeros((0, s)),
            source_energy: Array1::zeros(0),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.flame_key.len()
    }

    pub fn n_species(&self) -> usize {
        self.species_names.len()
    }

    pub fn species_names(&self) -> &[String] {
        &self.species_names
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species_names.iter().position(|s| s == name)
    }

    pub fn flame_key(&self) -> &Array1<f64> {
        &self.flame_key
    }

    pub fn x(&self) -> &Array1<f64> {
        &self.x
    }

    pub fn z_mix(&self) -> &Array1<f64> {
        &self.z_mix
    }

    pub fn temperature(&self) -> &Array1<f64> {
        &self.temperature
    }

    pub fn y(&self) -> &Array2<f64> {
        &self.y
    }

    pub fn sdot(&self) -> &Array2<f64> {
        &self.sdot
    }

    pub fn source_energy(&self) -> &Array1<f64> {
        &self.source_energy
    }

    /// Distinct flame keys in ascending order.
    pub fn flame_keys(&self) -> Vec<f64> {
        let mut keys: Vec<f64> = self.flame_key.to_vec();
        keys.sort_by(f64::total_cmp);
        keys.dedup_by(|a, b| a.to_bits() == b.to_bits());
        keys
    }

    /// New dataset made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            species_names: self.species_names.clone(),
            flame_key: self.flame_key.select(Axis(0), rows),
            x: self.x.select(Axis(0), rows),
            z_mix: self.z_mix.select(Axis(0), rows),
            temperature: self.temperature.select(Axis(0), rows),
            y: self.y.select(Axis(0), rows),
            sdot: self.sdot.select(Axis(0), rows),
            source_energy: self.source_energy.select(Axis(0), rows),
        }
    }

    /// Appends the rows of `other`. Species lists must match.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.species_names != other.species_names {
            return Err(Error::Dimension("cannot concatenate datasets with different species".into()));
        }
        let cat1 = |a: &Array1<f64>, b: &Array1<f64>| ndarray::concatenate(Axis(0), &[a.view(), b.view()]).unwrap();
        let cat2 = |a: &Array2<f64>, b: &Array2<f64>| ndarray::concatenate(Axis(0), &[a.view(), b.view()]).unwrap();
        Ok(Dataset {
            species_names: self.species_names.clone(),
            flame_key: cat1(&self.flame_key, &other.flame_key),
            x: cat1(&self.x, &other.x),
            z_mix: cat1(&self.z_mix, &other.z_mix),
            temperature: cat1(&self.temperature, &other.temperature),
            y: cat2(&self.y, &other.y),
            sdot: cat2(&self.sdot, &other.sdot),
            source_energy: cat1(&self.source_energy, &other.source_energy),
        })
    }

    /// Replaces the mass-fraction, source and source-energy blocks.
    pub(crate) fn with_values(&self, y: Array2<f64>, sdot: Array2<f64>, source_energy: Array1<f64>) -> Dataset {
        Dataset { y, sdot, source_energy, ..self.clone() }
    }
}
