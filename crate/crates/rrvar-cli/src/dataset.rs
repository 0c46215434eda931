//! CSV dataset ingestion and export.
//!
//! Layout: one row per time point, one column per series, comma-delimited.
//! A header row of series names is optional on input; written files always
//! carry one. Values are emitted with Rust's shortest round-trip `f64`
//! formatting, so a written file parses back bit-exactly.

use std::path::Path;

use nalgebra::DMatrix;

use crate::CmdError;

/// A parsed dataset: series names plus a `T x K` value matrix.
pub struct Dataset {
    pub names: Vec<String>,
    pub y: DMatrix<f64>,
}

fn all_numeric(record: &csv::StringRecord) -> bool {
    record
        .iter()
        .all(|f| f.trim().parse::<f64>().map_or(false, |v| v.is_finite()))
}

/// Read a dataset, detecting whether the first row is a header.
pub fn read(path: &Path) -> Result<Dataset, CmdError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CmdError::usage(format!("cannot read {}: {e}", path.display())))?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut names: Option<Vec<String>> = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CmdError::usage(format!("{}: {e}", path.display())))?;
        if idx == 0 && !all_numeric(&record) {
            names = Some(record.iter().map(str::to_string).collect());
            continue;
        }
        let row: Vec<f64> = record
            .iter()
            .enumerate()
            .map(|(col, field)| {
                field.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    CmdError::usage(format!(
                        "{}: row {}, column {}: not a finite number: {field:?}",
                        path.display(),
                        idx + 1,
                        col + 1
                    ))
                })
            })
            .collect::<Result<_, _>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(CmdError::usage(format!(
                    "{}: row {} has {} fields, expected {}",
                    path.display(),
                    idx + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(CmdError::usage(format!(
            "{}: need at least 2 data rows, found {}",
            path.display(),
            rows.len()
        )));
    }
    let k = rows[0].len();
    if let Some(names) = &names {
        if names.len() != k {
            return Err(CmdError::usage(format!(
                "{}: header has {} names but rows have {} fields",
                path.display(),
                names.len(),
                k
            )));
        }
    }
    let names = names.unwrap_or_else(|| (1..=k).map(|i| format!("series{i}")).collect());
    let y = DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]);
    Ok(Dataset { names, y })
}

/// Write a dataset with a header row.
pub fn write(path: &Path, names: &[String], y: &DMatrix<f64>) -> Result<(), CmdError> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CmdError::usage(format!("cannot write {}: {e}", path.display())))?;
    writer.write_record(names).map_err(CmdError::io)?;
    for i in 0..y.nrows() {
        let row: Vec<String> = (0..y.ncols()).map(|j| y[(i, j)].to_string()).collect();
        writer.write_record(&row).map_err(CmdError::io)?;
    }
    writer.flush().map_err(|e| CmdError::usage(e.to_string()))?;
    Ok(())
}

/// Write an arbitrary table of string cells (used for reports).
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CmdError> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CmdError::usage(format!("cannot write {}: {e}", path.display())))?;
    writer.write_record(header).map_err(CmdError::io)?;
    for row in rows {
        writer.write_record(row).map_err(CmdError::io)?;
    }
    writer.flush().map_err(|e| CmdError::usage(e.to_string()))?;
    Ok(())
}
