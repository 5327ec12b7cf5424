//! CSV datasets in and result tables out.
//!
//! Feature columns are matched by header name, never by position. Numbers
//! are written with 17 significant digits so every file reads back to the
//! same `f64`.

use std::fs::File;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{CliError, Result};

/// A parsed CSV: numeric features plus an optional label column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub values: DMatrix<f64>,
    pub feature_names: Vec<String>,
    pub labels: Option<Vec<String>>,
    pub label_column: Option<String>,
}

impl Dataset {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }
}

pub fn read_dataset(path: &Path, label_column: Option<&str>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::csv(path, e))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::csv(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let label_index = match label_column {
        Some(name) => Some(headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::Input(format!(
                "{}: label column `{name}` not found",
                path.display()
            ))
        })?),
        None => None,
    };
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&i| Some(i) != label_index)
        .collect();
    if feature_cols.is_empty() {
        return Err(CliError::Input(format!(
            "{}: no feature columns",
            path.display()
        )));
    }
    let feature_names: Vec<String> = feature_cols.iter().map(|&i| headers[i].clone()).collect();
    if let Some(dup) = first_duplicate(&feature_names) {
        return Err(CliError::Input(format!(
            "{}: duplicate column `{dup}`",
            path.display()
        )));
    }

    let mut data = Vec::new();
    let mut labels = label_index.map(|_| Vec::new());
    let mut nrows = 0;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::csv(path, e))?;
        if record.len() != headers.len() {
            return Err(CliError::Input(format!(
                "{}: row {} has {} fields, header has {}",
                path.display(),
                row + 1,
                record.len(),
                headers.len()
            )));
        }
        for &c in &feature_cols {
            let field = record[c].trim();
            let x: f64 = field.parse().map_err(|_| {
                CliError::Input(format!(
                    "{}: row {}, column `{}`: `{field}` is not a number",
                    path.display(),
                    row + 1,
                    headers[c]
                ))
            })?;
            if !x.is_finite() {
                return Err(CliError::Input(format!(
                    "{}: row {}, column `{}`: non-finite value",
                    path.display(),
                    row + 1,
                    headers[c]
                )));
            }
            data.push(x);
        }
        if let (Some(labels), Some(li)) = (labels.as_mut(), label_index) {
            labels.push(record[li].to_string());
        }
        nrows += 1;
    }
    if nrows == 0 {
        return Err(CliError::Input(format!("{}: no data rows", path.display())));
    }

    Ok(Dataset {
        values: DMatrix::from_row_slice(nrows, feature_names.len(), &data),
        feature_names,
        labels,
        label_column: label_column.map(str::to_string),
    })
}

fn first_duplicate(names: &[String]) -> Option<&str> {
    let mut seen = std::collections::HashSet::new();
    names
        .iter()
        .find(|n| !seen.insert(n.as_str()))
        .map(|n| n.as_str())
}

/// Reorders the columns of `data` to `names`. Missing or unexpected
/// columns are an error that lists them.
pub fn align_columns(data: &Dataset, names: &[String], context: &str) -> Result<Dataset> {
    let missing: Vec<&str> = names
        .iter()
        .filter(|n| !data.feature_names.contains(n))
        .map(|n| n.as_str())
        .collect();
    let extra: Vec<&str> = data
        .feature_names
        .iter()
        .filter(|n| !names.contains(n))
        .map(|n| n.as_str())
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        let mut msg = format!("{context}: feature columns do not match");
        if !missing.is_empty() {
            msg.push_str(&format!("; missing: {}", missing.join(", ")));
        }
        if !extra.is_empty() {
            msg.push_str(&format!("; unexpected: {}", extra.join(", ")));
        }
        return Err(CliError::Input(msg));
    }
    let order: Vec<usize> = names
        .iter()
        .map(|n| data.feature_names.iter().position(|f| f == n).unwrap())
        .collect();
    let values = DMatrix::from_fn(data.nrows(), names.len(), |r, c| data.values[(r, order[c])]);
    Ok(Dataset {
        values,
        feature_names: names.to_vec(),
        labels: data.labels.clone(),
        label_column: data.label_column.clone(),
    })
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    writer
        .write_record(header)
        .map_err(|e| CliError::csv(path, e))?;
    for row in rows {
        writer
            .write_record(row)
            .map_err(|e| CliError::csv(path, e))?;
    }
    writer.flush().map_err(|e| CliError::io(path, e))
}

/// Writes an n × k score matrix, with the label column first when present.
pub fn write_scores(
    path: &Path,
    scores: &DMatrix<f64>,
    labels: Option<(&str, &[String])>,
) -> Result<()> {
    let mut header: Vec<String> = Vec::new();
    if let Some((name, _)) = labels {
        header.push(name.to_string());
    }
    header.extend(component_names(scores.ncols()));
    let rows: Vec<Vec<String>> = (0..scores.nrows())
        .map(|r| {
            let mut row = Vec::with_capacity(header.len());
            if let Some((_, l)) = labels {
                row.push(l[r].clone());
            }
            row.extend(scores.row(r).iter().map(|&x| fmt_f64(x)));
            row
        })
        .collect();
    write_table(path, &header, &rows)
}

/// `c1, c2, …` column names for k components.
pub fn component_names(k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("c{i}")).collect()
}

/// Writes a numeric matrix with one named row per entry of `row_names`.
pub fn write_named_rows(
    path: &Path,
    first: &str,
    columns: &[String],
    row_names: &[String],
    values: &DMatrix<f64>,
) -> Result<()> {
    let mut header = vec![first.to_string()];
    header.extend(columns.iter().cloned());
    let rows: Vec<Vec<String>> = row_names
        .iter()
        .enumerate()
        .map(|(r, name)| {
            let mut row = vec![name.clone()];
            row.extend(values.row(r).iter().map(|&x| fmt_f64(x)));
            row
        })
        .collect();
    write_table(path, &header, &rows)
}
