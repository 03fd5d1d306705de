use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::Dataset;
use crate::{Error, Result};

/// Per-column z-score statistics (population standard deviation).
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnStats {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
    /// Columns with zero variance; their scale is 1.
    pub constant: Vec<bool>,
}

impl ColumnStats {
    pub fn fit(m: ArrayView2<'_, f64>) -> Self {
        let n = m.nrows() as f64;
        let mut center = Vec::with_capacity(m.ncols());
        let mut scale = Vec::with_capacity(m.ncols());
        let mut constant = Vec::with_capacity(m.ncols());
        for col in m.axis_iter(Axis(1)) {
            let first = col.first().copied().unwrap_or(0.0);
            if col.iter().all(|v| v.to_bits() == first.to_bits()) {
                center.push(first);
                scale.push(1.0);
                constant.push(true);
                continue;
            }
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let std = var.sqrt();
            if std == 0.0 || std <= 1e-14 * mean.abs() {
                center.push(mean);
                scale.push(1.0);
                constant.push(true);
            } else {
                center.push(mean);
                scale.push(std);
                constant.push(false);
            }
        }
        Self { center, scale, constant }
    }

    pub fn fit_vector(v: ArrayView1<'_, f64>) -> Self {
        Self::fit(v.insert_axis(Axis(1)))
    }

    pub fn len(&self) -> usize {
        self.center.len()
    }

    pub fn is_empty(&self) -> bool {
        self.center.is_empty()
    }

    pub fn apply(&self, m: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = m.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (c, s) = (self.center[j], self.scale[j]);
            col.mapv_inplace(|v| (v - c) / s);
        }
        out
    }

    pub fn invert(&self, m: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = m.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (c, s) = (self.center[j], self.scale[j]);
            col.mapv_inplace(|v| v * s + c);
        }
        out
    }

    pub fn apply_vector(&self, v: ArrayView1<'_, f64>) -> Array1<f64> {
        v.mapv(|x| (x - self.center[0]) / self.scale[0])
    }

    pub fn invert_vector(&self, v: ArrayView1<'_, f64>) -> Array1<f64> {
        v.mapv(|x| x * self.scale[0] + self.center[0])
    }

    /// Keeps only the listed columns.
    pub fn subset(&self, cols: &[usize]) -> ColumnStats {
        ColumnStats {
            center: cols.iter().map(|&c| self.center[c]).collect(),
            scale: cols.iter().map(|&c| self.scale[c]).collect(),
            constant: cols.iter().map(|&c| self.constant[c]).collect(),
        }
    }
}

/// Statistics for the mass-fraction inputs and both target blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub y: ColumnStats,
    pub sdot: ColumnStats,
    pub source_energy: ColumnStats,
}

impl NormStats {
    pub fn fit(ds: &Dataset) -> Result<Self> {
        if ds.n_rows() < 2 {
            return Err(Error::InputDomain(format!(
                "normalization needs at least 2 rows, got {}",
                ds.n_rows()
            )));
        }
        Ok(Self {
            y: ColumnStats::fit(ds.y().view()),
            sdot: ColumnStats::fit(ds.sdot().view()),
            source_energy: ColumnStats::fit_vector(ds.source_energy().view()),
        })
    }

    /// Z-scores Y, Sdot and source energy. Other columns are untouched.
    pub fn apply(&self, ds: &Dataset) -> Dataset {
        ds.with_values(
            self.y.apply(ds.y().view()),
            self.sdot.apply(ds.sdot().view()),
            self.source_energy.apply_vector(ds.source_energy().view()),
        )
    }

    pub fn unapply(&self, ds: &Dataset) -> Dataset {
        ds.with_values(
            self.y.invert(ds.y().view()),
            self.sdot.invert(ds.sdot().view()),
            self.source_energy.invert_vector(ds.source_energy().view()),
        )
    }
}

pub fn fit_norm(ds: &Dataset) -> Result<NormStats> {
    NormStats::fit(ds)
}

pub fn apply_norm(ds: &Dataset, stats: &NormStats) -> Dataset {
    stats.apply(ds)
}
