//! CSV ingestion.

use std::path::Path;

use cise_core::Dataset;
use nalgebra::{DMatrix, DVector};

use crate::error::{CliError, CliResult};

/// A dataset together with the predictor names from the header.
#[derive(Debug, Clone)]
pub struct NamedDataset {
    pub data: Dataset,
    pub names: Vec<String>,
    pub response: String,
}

impl NamedDataset {
    pub fn names_of(&self, idx: &[usize]) -> Vec<String> {
        idx.iter().map(|&i| self.names[i].clone()).collect()
    }

    /// Resolves predictor names to 0-based column indices.
    pub fn indices_of(&self, names: &[String]) -> CliResult<Vec<usize>> {
        let mut out: Vec<usize> = names
            .iter()
            .map(|n| {
                self.names
                    .iter()
                    .position(|c| c == n)
                    .ok_or_else(|| CliError::MissingColumn(n.clone()))
            })
            .collect::<CliResult<_>>()?;
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }
}

/// Reads a headed CSV file. Every column other than `response` becomes a
/// predictor, in file order.
pub fn load_csv(path: impl AsRef<Path>, response: &str) -> CliResult<NamedDataset> {
    let path = path.as_ref();
    let io_err = |e: &dyn std::fmt::Display| CliError::Io { path: path.display().to_string(), detail: e.to_string() };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| io_err(&e))?;
    let header: Vec<String> = rdr.headers().map_err(|e| io_err(&e))?.iter().map(str::to_owned).collect();
    let ry = header
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| CliError::MissingColumn(response.to_owned()))?;
    let names: Vec<String> = header.iter().enumerate().filter(|(j, _)| *j != ry).map(|(_, h)| h.clone()).collect();
    let p = names.len();

    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| CliError::ParseError {
            row,
            column: String::new(),
            detail: e.to_string(),
        })?;
        if rec.len() != header.len() {
            return Err(CliError::ParseError {
                row,
                column: String::new(),
                detail: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| CliError::ParseError {
                row,
                column: header[j].clone(),
                detail: format!("`{cell}` is not a finite number"),
            })?;
            if j == ry {
                ys.push(v);
            } else {
                xs.push(v);
            }
        }
    }
    let n = ys.len();
    if p == 0 || n <= p {
        return Err(CliError::TooFewRows { n, p });
    }
    let x = DMatrix::from_row_slice(n, p, &xs);
    let data = Dataset::new(x, DVector::from_vec(ys))?;
    Ok(NamedDataset { data, names, response: response.to_owned() })
}
