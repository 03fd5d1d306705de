//! Planted-model task: targets are smooth functions of a known linear
//! embedding `Y W*` and the mixture fraction.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::{Error, Result};

const NAMES: [&str; 8] = ["CH4", "O2", "CO2", "H2O", "CO", "H2", "OH", "N2"];

#[derive(Debug, Clone)]
pub struct PlantedTask {
    pub dataset: Dataset,
    /// `s x p` with orthonormal columns.
    pub w_true: Array2<f64>,
}

fn species_names(s: usize) -> Vec<String> {
    (0..s).map(|i| NAMES.get(i).map_or_else(|| format!("X{i}"), |n| n.to_string())).collect()
}

/// Random orthonormal `rows x cols` matrix.
pub fn random_orthonormal(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0));
    let q = g.qr().q();
    Array2::from_shape_fn((rows, cols), |(i, j)| q[(i, j)])
}

/// `rows` samples over `species` mass fractions with `n_pv` planted
/// directions. Each flame key groups 50 consecutive rows.
pub fn planted_dataset(rows: usize, species: usize, n_pv: usize, seed: u64) -> Result<PlantedTask> {
    if n_pv == 0 || n_pv >= species {
        return Err(Error::InputDomain(format!("need 0 < p < s, got p={n_pv}, s={species}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w_true = random_orthonormal(species, n_pv, seed ^ 0x5eed);
    let mut y = Array2::zeros((rows, species));
    for mut row in y.rows_mut() {
        row.mapv_inplace(|_| rng.gen_range(0.0..1.0));
        let total = row.sum();
        row /= total;
    }
    // Centred and rescaled so the planted coordinates are O(1).
    let mean = y.mean_axis(ndarray::Axis(0)).expect("nonempty");
    let u = (&y - &mean).dot(&w_true) * 8.0;
    let z = Array1::from_shape_fn(rows, |_| rng.gen_range(0.0..1.0));
    let energy = Array1::from_shape_fn(rows, |i| {
        let r = u.row(i);
        let mut e = (1.5 * r[0]).tanh() + 0.8 * z[i] * z[i];
        if n_pv > 1 {
            e += 0.5 * (1.2 * r[1]).sin();
        }
        for j in 2..n_pv {
            e += 0.3 * r[j];
        }
        e * 1e9
    });
    let mut sdot = Array2::zeros((rows, species));
    for i in 0..rows {
        for k in 0..species {
            let a = u[(i, k % n_pv)];
            sdot[(i, k)] = (0.7 * a + 0.1 * k as f64).tanh() + 0.2 * z[i];
        }
    }
    let flame_key = Array1::from_shape_fn(rows, |i| (i / 50) as f64);
    let x = Array1::from_shape_fn(rows, |i| (i % 50) as f64);
    let temperature = Array1::from_elem(rows, 300.0);
    let dataset = Dataset::new(species_names(species), flame_key, x, z, temperature, y, sdot, energy)?;
    Ok(PlantedTask { dataset, w_true })
}
