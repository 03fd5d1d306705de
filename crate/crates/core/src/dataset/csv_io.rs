//! Dataset CSV: `flame_key,x,Zmix,T,Y_<sp>...,SRC_<sp>...,souener`, every
//! float written with 17 significant digits so values survive a round trip
//! bit for bit.

use std::io::Write;
use std::path::{Path, PathBuf};

use super::{Dataset, DatasetColumns};
use crate::{Error, Result};

const LEADING: [&str; 4] = ["flame_key", "x", "Zmix", "T"];
const ENERGY: &str = "souener";

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn header(species: &[String]) -> Vec<String> {
    let mut h: Vec<String> = LEADING.iter().map(|s| s.to_string()).collect();
    h.extend(species.iter().map(|s| format!("Y_{s}")));
    h.extend(species.iter().map(|s| format!("SRC_{s}")));
    h.push(ENERGY.to_string());
    h
}

pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(header(ds.species_names())).map_err(csv_err)?;
    let mut record: Vec<String> = Vec::with_capacity(5 + 2 * ds.n_species());
    for i in 0..ds.n_rows() {
        record.clear();
        record.push(fmt_f64(ds.flame_key()[i]));
        record.push(fmt_f64(ds.x()[i]));
        record.push(fmt_f64(ds.z_mix()[i]));
        record.push(fmt_f64(ds.temperature()[i]));
        record.extend(ds.y().row(i).iter().map(|v| fmt_f64(*v)));
        record.extend(ds.sdot().row(i).iter().map(|v| fmt_f64(*v)));
        record.push(fmt_f64(ds.source_energy()[i]));
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn schema_error(column: &str, msg: impl Into<String>) -> Error {
    Error::Csv { row: 0, column: column.to_string(), msg: msg.into() }
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let headers: Vec<String> = r
        .headers()
        .map_err(|e| schema_error("header", e.to_string()))?
        .iter()
        .map(|s| s.to_string())
        .collect();

    for (i, name) in LEADING.iter().enumerate() {
        match headers.get(i) {
            Some(h) if h == name => {}
            Some(h) => return Err(schema_error(name, format!("expected column '{name}' at position {i}, found '{h}'"))),
            None => return Err(schema_error(name, format!("missing column '{name}'"))),
        }
    }
    if headers.last().map(String::as_str) != Some(ENERGY) {
        return Err(schema_error(ENERGY, format!("missing column '{ENERGY}' (must be last)")));
    }
    let middle = &headers[LEADING.len()..headers.len() - 1];
    if middle.len() % 2 != 0 {
        return Err(schema_error("Y_/SRC_", "unequal number of Y_ and SRC_ columns"));
    }
    let s = middle.len() / 2;
    let mut species = Vec::with_capacity(s);
    for (k, h) in middle[..s].iter().enumerate() {
        let name = h
            .strip_prefix("Y_")
            .ok_or_else(|| schema_error(h, "expected a Y_<species> column"))?;
        let src = &middle[s + k];
        if src.strip_prefix("SRC_") != Some(name) {
            return Err(schema_error(src, format!("expected column 'SRC_{name}'")));
        }
        species.push(name.to_string());
    }

    let mut cols = DatasetColumns::default();
    for (row, rec) in r.records().enumerate() {
        let row = row + 1;
        let rec = rec.map_err(|e| Error::Csv { row, column: String::new(), msg: e.to_string() })?;
        if rec.len() != headers.len() {
            return Err(Error::Csv {
                row,
                column: String::new(),
                msg: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        let mut values = Vec::with_capacity(rec.len());
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Csv {
                row,
                column: headers[c].clone(),
                msg: format!("non-numeric value '{cell}' (column index {c})"),
            })?;
            values.push(v);
        }
        cols.flame_key.push(values[0]);
        cols.x.push(values[1]);
        cols.z_mix.push(values[2]);
        cols.temperature.push(values[3]);
        cols.y.extend_from_slice(&values[4..4 + s]);
        cols.sdot.extend_from_slice(&values[4 + s..4 + 2 * s]);
        cols.source_energy.push(values[4 + 2 * s]);
    }
    Dataset::from_columns(species, cols)
}

/// Provenance of a generated dataset, stored next to the CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMetadata {
    pub mechanism_hash: String,
    pub grid_points: usize,
    pub domain_length: f64,
    pub n_flames_requested: usize,
    pub n_flames_solved: usize,
    pub shrink: f64,
    pub pressure: f64,
    pub solver_tolerance: f64,
    pub max_pseudo_steps: usize,
    pub extinction_threshold: f64,
    pub rows_kept: usize,
    pub rows_dropped: usize,
}

impl DatasetMetadata {
    pub fn sidecar_path(csv_path: &Path) -> PathBuf {
        let mut s = csv_path.as_os_str().to_owned();
        s.push(".meta");
        PathBuf::from(s)
    }
}

pub fn write_metadata(meta: &DatasetMetadata, csv_path: impl AsRef<Path>) -> Result<PathBuf> {
    let path = DatasetMetadata::sidecar_path(csv_path.as_ref());
    let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(out, "mechanism_sha256={}", meta.mechanism_hash)?;
    writeln!(out, "grid_points={}", meta.grid_points)?;
    writeln!(out, "domain_length={}", fmt_f64(meta.domain_length))?;
    writeln!(out, "n_flames_requested={}", meta.n_flames_requested)?;
    writeln!(out, "n_flames_solved={}", meta.n_flames_solved)?;
    writeln!(out, "shrink={}", fmt_f64(meta.shrink))?;
    writeln!(out, "pressure={}", fmt_f64(meta.pressure))?;
    writeln!(out, "solver_tolerance={}", fmt_f64(meta.solver_tolerance))?;
    writeln!(out, "max_pseudo_steps={}", meta.max_pseudo_steps)?;
    writeln!(out, "extinction_threshold={}", fmt_f64(meta.extinction_threshold))?;
    writeln!(out, "rows_kept={}", meta.rows_kept)?;
    writeln!(out, "rows_dropped={}", meta.rows_dropped)?;
    out.flush()?;
    Ok(path)
}
