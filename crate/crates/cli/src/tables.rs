//! Numeric CSV tables with a header row.

use std::path::Path;

use anyhow::{bail, Context, Result};
use ndarray::Array2;

#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
        let columns = reader
            .headers()
            .with_context(|| format!("cannot read header of {}", path.display()))?
            .iter()
            .map(|c| c.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.with_context(|| format!("{}: malformed row {}", path.display(), i + 1))?;
            rows.push(record.iter().map(|v| v.trim().to_string()).collect());
        }
        Ok(Self { columns, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Parses one column as `f64`.
    pub fn numeric_column(&self, name: &str, source: &Path) -> Result<Vec<f64>> {
        let Some(j) = self.position(name) else {
            bail!("{} has no '{name}' column", source.display());
        };
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row[j]
                    .parse::<f64>()
                    .with_context(|| format!("{}: row {}, column '{name}': '{}' is not a number", source.display(), i + 1, row[j]))
            })
            .collect()
    }

    /// Parses the named columns into a row-major matrix.
    pub fn matrix(&self, names: &[String], source: &Path) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((self.len(), names.len()));
        for (j, name) in names.iter().enumerate() {
            for (i, v) in self.numeric_column(name, source)?.into_iter().enumerate() {
                out[[i, j]] = v;
            }
        }
        Ok(out)
    }

    pub fn full_matrix(&self, source: &Path) -> Result<Array2<f64>> {
        self.matrix(&self.columns, source)
    }
}

pub fn write_matrix(path: &Path, prefix: &str, values: &Array2<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record((0..values.ncols()).map(|j| format!("{prefix}{j}")))?;
    for row in values.rows() {
        w.write_record(row.iter().map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `label,color` for a colored dataset.
pub fn write_meta(path: &Path, labels: &[u8], colors: &[u8]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(["label", "color"])?;
    for (y, c) in labels.iter().zip(colors) {
        w.write_record([y.to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
