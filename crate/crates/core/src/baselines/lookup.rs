//! Structured-grid tabulation with multilinear interpolation.
//!
//! Binary container (kind `lookup-table`, see [`crate::nn::CheckpointWriter`]):
//!
//! ```text
//! d        u32
//! axes     d vectors, each strictly increasing
//! values   matrix, one row per node (last axis fastest) by m outputs
//! ```

use std::collections::VecDeque;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::nn::{CheckpointReader, CheckpointWriter};
use crate::{Error, Result};

pub const MAX_DIMS: usize = 3;

const KIND: &str = "lookup-table";

#[derive(Debug, Clone, PartialEq)]
pub struct LookupTable {
    axes: Vec<Vec<f64>>,
    values: Array2<f64>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / (n - 1) as f64;
    let mut out: Vec<f64> = (0..n).map(|i| lo + i as f64 * h).collect();
    out[n - 1] = hi;
    out
}

impl LookupTable {
    pub fn from_nodes(axes: Vec<Vec<f64>>, values: Array2<f64>) -> Result<Self> {
        if axes.is_empty() || axes.len() > MAX_DIMS {
            return Err(Error::InputDomain(format!("tables support 1..={MAX_DIMS} dimensions, got {}", axes.len())));
        }
        for (k, a) in axes.iter().enumerate() {
            if a.len() < 2 || a.windows(2).any(|w| !(w[1] > w[0])) || a.iter().any(|v| !v.is_finite()) {
                return Err(Error::InputDomain(format!("axis {k} must be finite and strictly increasing with 2+ nodes")));
            }
        }
        let n_nodes: usize = axes.iter().map(|a| a.len()).product();
        if values.nrows() != n_nodes {
            return Err(Error::Dimension(format!("{} value rows for {n_nodes} grid nodes", values.nrows())));
        }
        Ok(Self { axes, values })
    }

    /// Regular grid over the sample range. Each node takes the mean of the
    /// samples nearest to it; nodes without samples copy the nearest filled
    /// node (breadth-first over the grid).
    pub fn build(pv: ArrayView2<'_, f64>, values: ArrayView2<'_, f64>, sizes: &[usize]) -> Result<Self> {
        let (n, d) = pv.dim();
        if n == 0 {
            return Err(Error::InputDomain("cannot tabulate zero samples".into()));
        }
        if d == 0 || d > MAX_DIMS {
            return Err(Error::InputDomain(format!("tables support 1..={MAX_DIMS} dimensions, got {d}")));
        }
        if sizes.len() != d || values.nrows() != n {
            return Err(Error::Dimension(format!(
                "{d} PV columns, {} grid sizes, {n} samples and {} value rows",
                sizes.len(),
                values.nrows()
            )));
        }
        if sizes.iter().any(|&s| s < 2) {
            return Err(Error::InputDomain("every grid axis needs at least 2 nodes".into()));
        }
        if pv.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InputDomain("samples must be finite".into()));
        }
        let axes: Vec<Vec<f64>> = (0..d)
            .map(|k| {
                let col = pv.column(k);
                let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if hi > lo {
                    linspace(lo, hi, sizes[k])
                } else {
                    linspace(lo - 0.5, lo + 0.5, sizes[k])
                }
            })
            .collect();
        let m = values.ncols();
        let n_nodes: usize = sizes.iter().product();
        let mut sum = Array2::<f64>::zeros((n_nodes, m));
        let mut count = vec![0usize; n_nodes];
        for i in 0..n {
            let mut flat = 0;
            for k in 0..d {
                let a = &axes[k];
                let h = (a[a.len() - 1] - a[0]) / (a.len() - 1) as f64;
                let idx = ((pv[(i, k)] - a[0]) / h).round().clamp(0.0, (a.len() - 1) as f64) as usize;
                flat = flat * a.len() + idx;
            }
            count[flat] += 1;
            let mut row = sum.row_mut(flat);
            row += &values.row(i);
        }
        let mut table = Array2::zeros((n_nodes, m));
        let mut queue = VecDeque::new();
        let mut filled = vec![false; n_nodes];
        for node in 0..n_nodes {
            if count[node] > 0 {
                let mean = &sum.row(node) / count[node] as f64;
                table.row_mut(node).assign(&mean);
                filled[node] = true;
                queue.push_back(node);
            }
        }
        while let Some(node) = queue.pop_front() {
            let idx = unflatten(node, sizes);
            for k in 0..d {
                for step in [-1i64, 1] {
                    let j = idx[k] as i64 + step;
                    if j < 0 || j >= sizes[k] as i64 {
                        continue;
                    }
                    let mut nb = idx.clone();
                    nb[k] = j as usize;
                    let flat = flatten(&nb, sizes);
                    if !filled[flat] {
                        filled[flat] = true;
                        let src = table.row(node).to_owned();
                        table.row_mut(flat).assign(&src);
                        queue.push_back(flat);
                    }
                }
            }
        }
        Self::from_nodes(axes, table)
    }

    pub fn n_dims(&self) -> usize {
        self.axes.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.values.ncols()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    fn sizes(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len()).collect()
    }

    /// Multilinear interpolation; coordinates outside the grid are clamped
    /// to its hull.
    pub fn lookup(&self, pv: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        let d = self.n_dims();
        if pv.len() != d {
            return Err(Error::Dimension(format!("table has {d} dimensions, query has {}", pv.len())));
        }
        let mut lower = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for k in 0..d {
            let a = &self.axes[k];
            let v = pv[k].clamp(a[0], a[a.len() - 1]);
            let i = a.partition_point(|&x| x <= v).saturating_sub(1).min(a.len() - 2);
            lower[k] = i;
            frac[k] = (v - a[i]) / (a[i + 1] - a[i]);
        }
        let sizes = self.sizes();
        let mut out = vec![0.0; self.n_outputs()];
        for corner in 0..(1usize << d) {
            let mut weight = 1.0;
            let mut idx = lower.clone();
            for k in 0..d {
                if corner >> k & 1 == 1 {
                    weight *= frac[k];
                    idx[k] += 1;
                } else {
                    weight *= 1.0 - frac[k];
                }
            }
            if weight == 0.0 {
                continue;
            }
            let row = self.values.row(flatten(&idx, &sizes));
            for (o, v) in out.iter_mut().zip(row) {
                *o += weight * v;
            }
        }
        Ok(out)
    }

    pub fn lookup_batch(&self, pv: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((pv.nrows(), self.n_outputs()));
        for (i, row) in pv.rows().into_iter().enumerate() {
            let v = self.lookup(row)?;
            out.row_mut(i).assign(&ArrayView1::from(&v));
        }
        Ok(out)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = CheckpointWriter::new(KIND);
        w.put_u32(self.axes.len() as u32);
        for a in &self.axes {
            w.put_vector(a);
        }
        w.put_matrix(&self.values);
        w.bytes().to_vec()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = CheckpointReader::open(path)?;
        if r.kind() != KIND {
            return Err(Error::Checkpoint(format!("expected a {KIND} file, found '{}'", r.kind())));
        }
        let d = r.get_u32()? as usize;
        if d == 0 || d > MAX_DIMS {
            return Err(Error::Checkpoint(format!("invalid table dimension {d}")));
        }
        let axes = (0..d).map(|_| r.get_vector()).collect::<Result<Vec<_>>>()?;
        let values = r.get_matrix()?;
        r.finish()?;
        Self::from_nodes(axes, values).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}

fn flatten(idx: &[usize], sizes: &[usize]) -> usize {
    idx.iter().zip(sizes).fold(0, |acc, (&i, &n)| acc * n + i)
}

fn unflatten(mut flat: usize, sizes: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; sizes.len()];
    for k in (0..sizes.len()).rev() {
        idx[k] = flat % sizes[k];
        flat /= sizes[k];
    }
    idx
}
