//! Labeled-CSV ingestion for the real-data workflow.

use std::path::Path;

use ndarray::{Array1, Array2};

use rose_core::error::{Error, Result};
use rose_core::models::{Dataset, ModelKind};

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Read a headered CSV into a dataset, `label_column` as the response and
/// either the listed feature columns or every other column in file order.
/// Row order is preserved. With `model = logistic` the labels must be 0/1.
pub fn ingest_csv(
    path: &Path,
    label_column: &str,
    feature_columns: Option<&[String]>,
    model: Option<ModelKind>,
) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| io_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::InvalidConfig(format!("label column `{label_column}` not found")))?;
    let feature_idx: Vec<usize> = match feature_columns {
        Some(cols) => cols
            .iter()
            .map(|c| {
                headers
                    .iter()
                    .position(|h| h == c)
                    .ok_or_else(|| Error::InvalidConfig(format!("feature column `{c}` not found")))
            })
            .collect::<Result<_>>()?,
        None => (0..headers.len()).filter(|&i| i != label_idx).collect(),
    };
    if feature_idx.is_empty() {
        return Err(Error::InvalidConfig("no feature columns".into()));
    }

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| io_err(path, e))?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(ys.len() + 2);
        let parse_field = |idx: usize| -> Result<f64> {
            let raw = record.get(idx).ok_or(Error::Parse {
                line,
                message: format!("missing column {idx}"),
            })?;
            raw.trim().parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("`{raw}` in column `{}` is not numeric", headers[idx]),
            })
        };
        let y = parse_field(label_idx)?;
        if model == Some(ModelKind::Logistic) && y != 0.0 && y != 1.0 {
            return Err(Error::Parse {
                line,
                message: format!("label `{y}` is not binary"),
            });
        }
        for &idx in &feature_idx {
            xs.push(parse_field(idx)?);
        }
        ys.push(y);
    }
    if ys.is_empty() {
        return Err(Error::EmptyInput);
    }
    let p = feature_idx.len();
    Dataset::new(
        Array2::from_shape_vec((ys.len(), p), xs).map_err(|e| Error::Domain(e.to_string()))?,
        Array1::from(ys),
        None,
    )
}

/// Write a dataset back out as a headered CSV (label first).
pub fn dataset_to_csv(dataset: &Dataset, label_name: &str, path: &Path) -> Result<()> {
    let p = dataset.dim();
    let mut body = String::new();
    body.push_str(label_name);
    for j in 0..p {
        body.push_str(&format!(",x{j}"));
    }
    body.push('\n');
    for i in 0..dataset.rows() {
        body.push_str(&format!("{}", dataset.responses[i]));
        for j in 0..p {
            body.push_str(&format!(",{}", dataset.covariates[(i, j)]));
        }
        body.push('\n');
    }
    std::fs::write(path, body).map_err(|e| io_err(path, e))
}
