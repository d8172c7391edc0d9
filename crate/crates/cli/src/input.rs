//! CSV data and shape-matrix input.

use std::path::Path;

use rankshape::{Matrix, ShapeMatrix};

use crate::CliError;

/// Reads a rectangular numeric CSV. A first row that does not parse as
/// numbers is taken as a header.
pub fn read_numeric_csv(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        let parsed: Vec<Result<f64, _>> = record.iter().map(|c| c.parse::<f64>()).collect();
        if idx == 0 && parsed.iter().any(|p| p.is_err()) {
            continue;
        }
        let mut row = Vec::with_capacity(parsed.len());
        for (col, (cell, p)) in record.iter().zip(parsed).enumerate() {
            match p {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(CliError::Input(format!(
                        "{}: row {line}, column {}: '{cell}' is not a finite number",
                        path.display(),
                        col + 1
                    )))
                }
            }
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(CliError::Input(format!(
                    "{}: row {line} has {} columns, expected {w}",
                    path.display(),
                    row.len()
                )))
            }
            _ => {}
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_data(path: &Path) -> Result<Matrix, CliError> {
    let rows = read_numeric_csv(path)?;
    if rows.len() < 2 {
        return Err(CliError::Input(format!("{}: need at least 2 observations, found {}", path.display(), rows.len())));
    }
    if rows[0].len() < 2 {
        return Err(CliError::Input(format!("{}: need at least 2 columns, found {}", path.display(), rows[0].len())));
    }
    Matrix::from_rows(&rows).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// `identity` or a path to a `k × k` CSV. A matrix with `V₁₁ ≠ 1` is
/// rescaled by `1/V₁₁` with a warning.
pub fn read_shape(spec: &str, k: usize) -> Result<ShapeMatrix, CliError> {
    if spec.eq_ignore_ascii_case("identity") {
        return Ok(ShapeMatrix::identity(k));
    }
    let path = Path::new(spec);
    let rows = read_numeric_csv(path).map_err(|e| CliError::V0(e.message()))?;
    if rows.len() != k || rows.iter().any(|r| r.len() != k) {
        return Err(CliError::V0(format!(
            "{}: expected a {k}x{k} matrix, found {} rows",
            path.display(),
            rows.len()
        )));
    }
    let mut m = Matrix::from_rows(&rows).map_err(|e| CliError::V0(e.to_string()))?;
    let v11 = m[(0, 0)];
    if !(v11 > 0.0) {
        return Err(CliError::V0(format!("{}: V[1,1] = {v11} must be positive", path.display())));
    }
    if v11 != 1.0 {
        eprintln!("warning[v0]: rescaled by 1/V[1,1] = {}", 1.0 / v11);
        m = m.scale(1.0 / v11);
    }
    ShapeMatrix::new(m).map_err(|e| CliError::V0(format!("{}: {e}", path.display())))
}

/// `estimate` or a comma-separated location vector of length `k`.
pub fn parse_theta(spec: &str, k: usize) -> Result<Option<Vec<f64>>, CliError> {
    if spec.eq_ignore_ascii_case("estimate") {
        return Ok(None);
    }
    let values: Vec<f64> = spec
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Input(format!("theta component '{}' is not a finite number", s.trim())))
        })
        .collect::<Result<_, _>>()?;
    if values.len() != k {
        return Err(CliError::Input(format!("theta has {} components, data has {k} columns", values.len())));
    }
    Ok(Some(values))
}
