use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::dataset::fmt_f64;
use crate::{Error, Result};

/// Leading principal directions of a column-centred data matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    /// `s x p`, orthonormal columns in order of decreasing variance.
    pub components: Array2<f64>,
    pub mean: Array1<f64>,
    /// Population variance along each component.
    pub eigenvalues: Vec<f64>,
    /// Share of the total variance captured by each component.
    pub explained_variance: Vec<f64>,
}

/// Eigendecomposition of the population covariance. Each component is
/// signed so its largest-magnitude entry is positive.
pub fn pca_fit(y: ArrayView2<'_, f64>, p: usize) -> Result<PcaBasis> {
    let (n, s) = y.dim();
    if p == 0 || p > s {
        return Err(Error::InputDomain(format!("PCA rank must lie in 1..={s}, got {p}")));
    }
    if n <= p {
        return Err(Error::InputDomain(format!("PCA of rank {p} needs more than {p} rows, got {n}")));
    }
    let mean = y.mean_axis(Axis(0)).expect("nonempty");
    let centered = &y - &mean;
    let cov = centered.t().dot(&centered) / n as f64;
    let eig = SymmetricEigen::new(DMatrix::from_fn(s, s, |i, j| cov[(i, j)]));
    let mut order: Vec<usize> = (0..s).collect();
    // Stable ordering keeps ties deterministic.
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let mut components = Array2::zeros((s, p));
    let mut eigenvalues = Vec::with_capacity(p);
    for (j, &k) in order.iter().take(p).enumerate() {
        let col = eig.eigenvectors.column(k);
        let pivot = (0..s).fold(0, |best, i| if col[i].abs() > col[best].abs() { i } else { best });
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..s {
            components[(i, j)] = sign * col[i];
        }
        eigenvalues.push(eig.eigenvalues[k].max(0.0));
    }
    let explained_variance = eigenvalues.iter().map(|v| if total > 0.0 { v / total } else { 0.0 }).collect();
    Ok(PcaBasis { components, mean, eigenvalues, explained_variance })
}

impl PcaBasis {
    pub fn n_components(&self) -> usize {
        self.components.ncols()
    }

    /// Scores `(Y - mean) C`.
    pub fn transform(&self, y: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if y.ncols() != self.mean.len() {
            return Err(Error::Dimension(format!("basis spans {} columns, data has {}", self.mean.len(), y.ncols())));
        }
        Ok((&y - &self.mean).dot(&self.components))
    }

    pub fn reconstruct(&self, scores: ArrayView2<'_, f64>) -> Array2<f64> {
        scores.dot(&self.components.t()) + &self.mean
    }

    /// Sum of squared residuals after projecting onto the basis.
    pub fn reconstruction_error(&self, y: ArrayView2<'_, f64>) -> Result<f64> {
        let r = self.reconstruct(self.transform(y)?.view());
        Ok((&y - &r).iter().map(|v| v * v).sum())
    }

    /// One row per input column: `column,pc1,...,pcp`, then an
    /// `explained_variance` row.
    pub fn write_csv(&self, column_names: &[String], path: impl AsRef<Path>) -> Result<()> {
        if column_names.len() != self.components.nrows() {
            return Err(Error::Dimension(format!(
                "{} names for {} basis rows",
                column_names.len(),
                self.components.nrows()
            )));
        }
        let mut out = String::from("column");
        for j in 0..self.n_components() {
            out.push_str(&format!(",pc{}", j + 1));
        }
        out.push('\n');
        for (name, row) in column_names.iter().zip(self.components.rows()) {
            out.push_str(name);
            for v in row {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
            out.push('\n');
        }
        out.push_str("explained_variance");
        for v in &self.explained_variance {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
        std::fs::write(path, out)?;
        Ok(())
    }
}
