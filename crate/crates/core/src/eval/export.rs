//! Result files. `results.csv` carries a leading `schema` column whose
//! value is [`RESULTS_SCHEMA`]; the `fig*.csv` files are plot data.

use std::path::{Path, PathBuf};

use super::{Conformity, ResultRow, ResultTable};
use crate::dataset::{fmt_f64, SplitMode};
use crate::{Error, Result};

pub const RESULTS_SCHEMA: u32 = 1;

const RESULTS_HEADER: [&str; 13] = [
    "schema",
    "method",
    "split",
    "fraction",
    "p",
    "seeds",
    "mae_mean",
    "mae_std",
    "max_gram_offdiag",
    "norm_min",
    "norm_max",
    "max_cov_offdiag",
    "failure",
];

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn to_csv(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

fn opt(v: Option<f64>) -> String {
    v.filter(|x| !x.is_nan()).map(fmt_f64).unwrap_or_default()
}

fn results_rows(table: &ResultTable) -> Vec<Vec<String>> {
    table
        .rows
        .iter()
        .map(|r| {
            let c = r.conformity.as_ref();
            vec![
                RESULTS_SCHEMA.to_string(),
                r.method.clone(),
                r.split.to_string(),
                fmt_f64(r.fraction),
                r.p.to_string(),
                r.seeds.to_string(),
                fmt_f64(r.mae_mean),
                fmt_f64(r.mae_std),
                opt(c.map(|c| c.max_gram_off_diagonal)),
                opt(c.map(|c| c.norm_min)),
                opt(c.map(|c| c.norm_max)),
                opt(c.map(|c| c.max_covariance_off_diagonal)),
                r.failure.clone().unwrap_or_default(),
            ]
        })
        .collect()
}

fn summary(r: &ResultRow) -> Vec<String> {
    vec![r.method.clone(), r.split.to_string(), r.p.to_string(), fmt_f64(r.mae_mean), fmt_f64(r.mae_std)]
}

/// Writes `results.csv`, `fig3_split_strategy.csv`, `fig4_cpv.csv` and
/// `fig5_key_species.csv` into `dir`. Nothing is written for an empty table.
pub fn export_results(table: &ResultTable, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    if table.rows.is_empty() {
        return Err(Error::InputDomain("result table is empty".into()));
    }
    let dir = dir.as_ref();
    let results = to_csv(&RESULTS_HEADER, &results_rows(table))?;

    let fig3 = to_csv(&["method", "split", "p", "mae_mean", "mae_std"], &table.rows.iter().map(summary).collect::<Vec<_>>())?;

    // Methods evaluated at more than one PV count form the lines of the PV plot.
    let swept = |m: &str| {
        let mut ps: Vec<usize> = table.rows.iter().filter(|r| r.method == m).map(|r| r.p).collect();
        ps.sort_unstable();
        ps.dedup();
        ps.len() > 1
    };
    let fig4_rows: Vec<Vec<String>> = table.rows.iter().filter(|r| swept(&r.method)).map(summary).collect();
    let fig4 = to_csv(&["method", "split", "p", "mae_mean", "mae_std"], &fig4_rows)?;

    let mut fig5_rows = Vec::new();
    for r in &table.rows {
        for (species, v) in &r.key_mae_mean {
            fig5_rows.push(vec![r.method.clone(), r.split.to_string(), r.p.to_string(), species.clone(), fmt_f64(*v)]);
        }
    }
    let fig5 = to_csv(&["method", "split", "p", "species", "mae_mean"], &fig5_rows)?;

    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, bytes) in [
        ("results.csv", results),
        ("fig3_split_strategy.csv", fig3),
        ("fig4_cpv.csv", fig4),
        ("fig5_key_species.csv", fig5),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, bytes)?;
        written.push(path);
    }
    Ok(written)
}

fn parse_f64(s: &str, row: usize, column: &str) -> Result<f64> {
    if s.is_empty() {
        return Ok(f64::NAN);
    }
    s.parse().map_err(|_| Error::Csv { row, column: column.into(), msg: format!("'{s}' is not a number") })
}

/// Reads a `results.csv`. Per-seed values and key-species means are not
/// part of the file and come back empty.
pub fn read_results(path: impl AsRef<Path>) -> Result<ResultTable> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    if header != RESULTS_HEADER {
        return Err(Error::Csv { row: 0, column: "header".into(), msg: format!("unexpected header {header:?}") });
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = i + 1;
        if rec[0] != RESULTS_SCHEMA.to_string() {
            return Err(Error::Csv { row, column: "schema".into(), msg: format!("unsupported schema {}", &rec[0]) });
        }
        let split: SplitMode = rec[2].parse()?;
        let int = |k: usize| {
            rec[k].parse::<usize>().map_err(|_| Error::Csv {
                row,
                column: RESULTS_HEADER[k].into(),
                msg: format!("'{}' is not an integer", &rec[k]),
            })
        };
        let conformity = if rec[11].is_empty() {
            None
        } else {
            Some(Conformity {
                max_gram_off_diagonal: parse_f64(&rec[8], row, "max_gram_offdiag")?,
                norm_min: parse_f64(&rec[9], row, "norm_min")?,
                norm_max: parse_f64(&rec[10], row, "norm_max")?,
                max_covariance_off_diagonal: parse_f64(&rec[11], row, "max_cov_offdiag")?,
            })
        };
        rows.push(ResultRow {
            method: rec[1].to_string(),
            split,
            fraction: parse_f64(&rec[3], row, "fraction")?,
            p: int(4)?,
            seeds: int(5)?,
            mae_mean: parse_f64(&rec[6], row, "mae_mean")?,
            mae_std: parse_f64(&rec[7], row, "mae_std")?,
            mae_per_seed: Vec::new(),
            key_mae_mean: Vec::new(),
            conformity,
            failure: (!rec[12].is_empty()).then(|| rec[12].to_string()),
        });
    }
    Ok(ResultTable { rows })
}
