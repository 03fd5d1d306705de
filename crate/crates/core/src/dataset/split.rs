use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitMode {
    /// Whole flames go to either side.
    ByFlamelet,
    /// Individual rows go to either side.
    ByPoint,
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitMode::ByFlamelet => "flamelet",
            SplitMode::ByPoint => "point",
        })
    }
}

impl FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flamelet" | "by_flamelet" => Ok(SplitMode::ByFlamelet),
            "point" | "by_point" => Ok(SplitMode::ByPoint),
            other => Err(Error::Config(format!("unknown split mode '{other}' (expected point|flamelet)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub mode: SplitMode,
    /// Share of flames (or rows) assigned to the training side.
    pub fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(mode: SplitMode, fraction: f64, seed: u64) -> Result<Self> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::Split(format!("fraction {fraction} must lie in (0, 1)")));
        }
        Ok(Self { mode, fraction, seed })
    }
}

/// Row indices of the train and test sides, each ascending.
pub fn split_indices(ds: &Dataset, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.fraction > 0.0 && spec.fraction < 1.0) {
        return Err(Error::Split(format!("fraction {} must lie in (0, 1)", spec.fraction)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.mode {
        SplitMode::ByFlamelet => {
            let mut keys = ds.flame_keys();
            if keys.len() < 2 {
                return Err(Error::Split(format!(
                    "flamelet split needs at least 2 flame keys, found {}",
                    keys.len()
                )));
            }
            keys.shuffle(&mut rng);
            let n_train = ((spec.fraction * keys.len() as f64).ceil() as usize).clamp(1, keys.len() - 1);
            let mut train_keys: Vec<u64> = keys[..n_train].iter().map(|k| k.to_bits()).collect();
            train_keys.sort_unstable();
            let (mut train, mut test) = (Vec::new(), Vec::new());
            for (i, k) in ds.flame_key().iter().enumerate() {
                if train_keys.binary_search(&k.to_bits()).is_ok() {
                    train.push(i);
                } else {
                    test.push(i);
                }
            }
            Ok((train, test))
        }
        SplitMode::ByPoint => {
            let n = ds.n_rows();
            if n < 2 {
                return Err(Error::Split(format!("point split needs at least 2 rows, found {n}")));
            }
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let n_train = ((spec.fraction * n as f64).round() as usize).clamp(1, n - 1);
            let mut train = idx[..n_train].to_vec();
            let mut test = idx[n_train..].to_vec();
            train.sort_unstable();
            test.sort_unstable();
            Ok((train, test))
        }
    }
}

/// Partitions `ds` into (train, test).
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(ds, spec)?;
    Ok((ds.select_rows(&train), ds.select_rows(&test)))
}

/// Writes the split as plain text: flame keys per side for flamelet splits,
/// row indices for point splits.
pub fn write_split_manifest(ds: &Dataset, spec: &SplitSpec, path: impl AsRef<Path>) -> Result<()> {
    let (train, test) = split_indices(ds, spec)?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "mode={} fraction={} seed={}", spec.mode, spec.fraction, spec.seed)?;
    match spec.mode {
        SplitMode::ByFlamelet => {
            let keys_of = |rows: &[usize]| -> Vec<String> {
                let mut k: Vec<f64> = rows.iter().map(|&i| ds.flame_key()[i]).collect();
                k.sort_by(f64::total_cmp);
                k.dedup();
                k.iter().map(|v| format!("{v:.16e}")).collect()
            };
            writeln!(out, "train_keys {}", keys_of(&train).join(" "))?;
            writeln!(out, "test_keys {}", keys_of(&test).join(" "))?;
        }
        SplitMode::ByPoint => {
            let join = |rows: &[usize]| rows.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(" ");
            writeln!(out, "train_rows {}", join(&train))?;
            writeln!(out, "test_rows {}", join(&test))?;
        }
    }
    out.flush()?;
    Ok(())
}
