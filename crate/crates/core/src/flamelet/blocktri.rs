//! Block-tridiagonal linear solve (block Thomas algorithm with per-block LU).

use nalgebra::{DMatrix, DVector};

/// `lower[j]` couples row block `j` to unknown block `j-1` (unused for
/// `j = 0`), `upper[j]` couples it to block `j+1` (unused for the last).
pub(crate) struct BlockTridiagonal {
    pub lower: Vec<DMatrix<f64>>,
    pub diag: Vec<DMatrix<f64>>,
    pub upper: Vec<DMatrix<f64>>,
}

impl BlockTridiagonal {
    pub fn zeros(blocks: usize, size: usize) -> Self {
        let z = || (0..blocks).map(|_| DMatrix::zeros(size, size)).collect::<Vec<_>>();
        Self { lower: z(), diag: z(), upper: z() }
    }

    pub fn block_size(&self) -> usize {
        self.diag.first().map_or(0, |b| b.nrows())
    }

    /// Solves in place; `rhs` is the stacked right-hand side. Returns `false`
    /// on a singular pivot block.
    pub fn solve(&self, rhs: &mut [f64]) -> bool {
        let m = self.diag.len();
        let b = self.block_size();
        let mut x_blocks: Vec<DMatrix<f64>> = Vec::with_capacity(m);
        let mut y_blocks: Vec<DVector<f64>> = Vec::with_capacity(m);
        for j in 0..m {
            let mut d = self.diag[j].clone();
            let mut r = DVector::from_column_slice(&rhs[j * b..(j + 1) * b]);
            if j > 0 {
                d -= &self.lower[j] * &x_blocks[j - 1];
                r -= &self.lower[j] * &y_blocks[j - 1];
            }
            let lu = d.lu();
            let x = if j + 1 < m {
                match lu.solve(&self.upper[j]) {
                    Some(x) => x,
                    None => return false,
                }
            } else {
                DMatrix::zeros(b, b)
            };
            let y = match lu.solve(&r) {
                Some(y) => y,
                None => return false,
            };
            if y.iter().any(|v| !v.is_finite()) {
                return false;
            }
            x_blocks.push(x);
            y_blocks.push(y);
        }
        let mut next: Option<DVector<f64>> = None;
        for j in (0..m).rev() {
            let mut sol = y_blocks[j].clone();
            if let Some(n) = &next {
                sol -= &x_blocks[j] * n;
            }
            rhs[j * b..(j + 1) * b].copy_from_slice(sol.as_slice());
            next = Some(sol);
        }
        true
    }
}
