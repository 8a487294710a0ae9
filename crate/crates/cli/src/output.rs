use std::fs::File;
use std::path::Path;

use ndarray::Array2;
use serde::Serialize;

use crate::error::CliResult;

fn component_headers(rank: usize) -> impl Iterator<Item = String> {
    (1..=rank).map(|r| format!("comp{r}"))
}

/// Writes a factor matrix with leading label columns, one row per matrix row.
pub fn write_factor(path: &Path, labels: &[&str], rows: &[Vec<String>], mat: &Array2<f64>) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    let header: Vec<String> = labels
        .iter()
        .map(|s| s.to_string())
        .chain(component_headers(mat.ncols()))
        .collect();
    w.write_record(&header)?;
    for (row, values) in rows.iter().zip(mat.rows()) {
        let record: Vec<String> = row
            .iter()
            .cloned()
            .chain(values.iter().map(|v| v.to_string()))
            .collect();
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Two-column series `(x, y)`.
pub fn write_series(path: &Path, header: [&str; 2], xs: &[String], ys: impl Iterator<Item = f64>) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for (x, y) in xs.iter().zip(ys) {
        w.write_record([x.clone(), y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> CliResult<()> {
    let file = File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), value)?;
    Ok(())
}
