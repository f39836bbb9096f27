use std::path::Path;

use super::{Dataset, TargetValues};
use crate::error::{Error, Result};

/// Reads a headered numeric CSV. Every column except `target_column` becomes a
/// feature, in file order.
pub fn read_csv_regression(path: &Path, target_column: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, 0, 0, e))?;
    let header = reader
        .headers()
        .map_err(|e| csv_error(path, 0, 0, e))?
        .clone();
    let target = header
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| {
            Error::Config(format!(
                "target column {target_column:?} not found in {}",
                path.display()
            ))
        })?;
    let width = header.len();
    let n_features = width - 1;

    let mut features = Vec::new();
    let mut targets = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // Row 1 is the header.
        let row = i + 2;
        let record = record.map_err(|e| csv_error(path, row, 0, e))?;
        if record.len() != width {
            return Err(Error::Csv {
                path: path.to_path_buf(),
                row,
                column: record.len().min(width) + 1,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| Error::Csv {
                path: path.to_path_buf(),
                row,
                column: c + 1,
                message: format!("non-numeric cell {cell:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::Csv {
                    path: path.to_path_buf(),
                    row,
                    column: c + 1,
                    message: format!("non-finite cell {cell:?}"),
                });
            }
            if c == target {
                targets.push(value);
            } else {
                features.push(value);
            }
        }
    }
    let n_obs = targets.len();
    Dataset::new(features, n_obs, n_features, TargetValues::Values(targets))
}

fn csv_error(path: &Path, row: usize, column: usize, e: csv::Error) -> Error {
    if let csv::ErrorKind::Io(_) = e.kind() {
        if let csv::ErrorKind::Io(io) = e.into_kind() {
            return Error::io(path, io);
        }
        unreachable!()
    }
    Error::Csv {
        path: path.to_path_buf(),
        row,
        column,
        message: e.to_string(),
    }
}
