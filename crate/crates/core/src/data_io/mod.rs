//! Readers and writers for logits, labels and dataset manifests.

mod manifest;
mod npy;

use std::fs;
use std::path::Path;

pub use manifest::{read_manifest, write_manifest, DatasetManifest, ManifestEntry, Role, SCHEMA_VERSION};
pub use npy::{encode_npy, parse_npy, read_npy, write_npy, ArrayData, ArrayFile, DType, NpyError};

use crate::error::{Error, Result};
use crate::numerics::LogitsMatrix;

fn has_extension(path: &Path, ext: &str) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

/// Logits from a 2-D `<f4`/`<f8` NPY file or a numeric CSV.
pub fn read_logits(path: &Path) -> Result<LogitsMatrix> {
    if has_extension(path, "csv") {
        return read_logits_csv(path);
    }
    let arr = read_npy(path)?;
    let shape = arr.shape().to_vec();
    let [rows, cols] = shape[..] else {
        return Err(Error::invalid(format!(
            "{}: logits must be a 2-D array, got shape {shape:?}",
            path.display()
        )));
    };
    let data = match arr.into_parts().1 {
        ArrayData::F64(v) => v,
        ArrayData::F32(v) => v.into_iter().map(f64::from).collect(),
        ArrayData::I64(_) => {
            return Err(Error::invalid(format!("{}: logits must be floating point", path.display())))
        }
    };
    LogitsMatrix::new(data, rows, cols)
        .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

pub fn write_logits_npy(path: &Path, logits: &LogitsMatrix) -> Result<()> {
    let arr = ArrayFile::new(
        vec![logits.n_rows(), logits.n_cols()],
        ArrayData::F64(logits.as_slice().to_vec()),
    )
    .map_err(|source| Error::Npy { path: path.to_path_buf(), source })?;
    write_npy(path, &arr)
}

pub fn write_labels_npy(path: &Path, labels: &[usize]) -> Result<()> {
    let arr = ArrayFile::new(vec![labels.len()], ArrayData::I64(labels.iter().map(|&y| y as i64).collect()))
        .map_err(|source| Error::Npy { path: path.to_path_buf(), source })?;
    write_npy(path, &arr)
}

fn parse_err(path: &Path, line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, column, message: message.into() }
}

fn csv_records(path: &Path) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io { path: path.to_path_buf(), source },
            other => parse_err(path, 0, 0, format!("{other:?}")),
        })?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, 0, e.to_string())
        })?;
        let line = rec.position().map_or(out.len() + 1, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        out.push((line, rec));
    }
    Ok(out)
}

fn is_header(rec: &csv::StringRecord) -> bool {
    rec.iter().any(|cell| cell.parse::<f64>().is_err())
}

/// Rectangular numeric CSV, optional header row (detected when any cell of
/// the first row is not a number).
pub fn read_logits_csv(path: &Path) -> Result<LogitsMatrix> {
    let mut records = csv_records(path)?;
    if records.first().is_some_and(|(_, r)| is_header(r)) {
        records.remove(0);
    }
    let Some((_, first)) = records.first() else {
        return Err(parse_err(path, 1, 1, "no data rows"));
    };
    let n_cols = first.len();
    let mut data = Vec::with_capacity(records.len() * n_cols);
    for (line, rec) in &records {
        if rec.len() != n_cols {
            return Err(parse_err(
                path,
                *line,
                rec.len().min(n_cols) + 1,
                format!("ragged row: {} fields, expected {n_cols}", rec.len()),
            ));
        }
        for (col, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(path, *line, col + 1, format!("not a number: '{cell}'")))?;
            if !v.is_finite() {
                return Err(parse_err(path, *line, col + 1, format!("non-finite value '{cell}'")));
            }
            data.push(v);
        }
    }
    LogitsMatrix::new(data, records.len(), n_cols)
        .map_err(|e| parse_err(path, 1, 1, e.to_string()))
}

/// Class labels from an `<i8` NPY vector, a CSV (first column) or a text
/// file with one integer per line. Labels must be 0-based; when
/// `n_classes` is given every label must lie in `[0, n_classes)`.
pub fn read_labels(path: &Path, n_classes: Option<usize>) -> Result<Vec<usize>> {
    let raw: Vec<(usize, i64)> = if has_extension(path, "npy") {
        let arr = read_npy(path)?;
        if arr.shape().len() != 1 {
            return Err(Error::invalid(format!(
                "{}: labels must be a 1-D array, got shape {:?}",
                path.display(),
                arr.shape()
            )));
        }
        match arr.into_parts().1 {
            ArrayData::I64(v) => v.into_iter().enumerate().map(|(i, y)| (i + 1, y)).collect(),
            _ => {
                return Err(Error::Npy {
                    path: path.to_path_buf(),
                    source: NpyError::UnsupportedDtype("labels must be '<i8'".into()),
                })
            }
        }
    } else if has_extension(path, "csv") {
        let mut records = csv_records(path)?;
        if records.first().is_some_and(|(_, r)| r.get(0).is_some_and(|c| c.parse::<i64>().is_err())) {
            records.remove(0);
        }
        records
            .into_iter()
            .map(|(line, rec)| {
                let cell = rec.get(0).unwrap_or("");
                cell.parse::<i64>()
                    .map(|y| (line, y))
                    .map_err(|_| parse_err(path, line, 1, format!("not an integer label: '{cell}'")))
            })
            .collect::<Result<_>>()?
    } else {
        let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.trim()
                    .parse::<i64>()
                    .map(|y| (i + 1, y))
                    .map_err(|_| parse_err(path, i + 1, 1, format!("not an integer label: '{}'", l.trim())))
            })
            .collect::<Result<_>>()?
    };

    if let Some(k) = n_classes {
        let min = raw.iter().map(|&(_, y)| y).min();
        let max = raw.iter().map(|&(_, y)| y).max();
        if let (Some(min), Some(max)) = (min, max) {
            if min >= 1 && max == k as i64 {
                return Err(Error::invalid(format!(
                    "{}: labels span [1, {k}]; labels must be 0-based class indices in [0, {k})",
                    path.display()
                )));
            }
        }
    }
    raw.into_iter()
        .map(|(line, y)| match (y, n_classes) {
            (y, _) if y < 0 => Err(parse_err(path, line, 1, format!("negative label {y}"))),
            (y, Some(k)) if y as u64 >= k as u64 => {
                Err(parse_err(path, line, 1, format!("label {y} outside [0, {k})")))
            }
            (y, _) => Ok(y as usize),
        })
        .collect()
}
