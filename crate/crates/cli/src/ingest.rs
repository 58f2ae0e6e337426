//! Reading sample matrices from delimited text.

use std::path::Path;

use ndarray::Array2;

use crate::{CliError, CliResult};

/// Which columns to keep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnSelector {
    Index(usize),
    Name(String),
}

/// Parses `0,2,5` or `age,height`; numbers are zero-based column positions.
pub fn parse_columns(text: &str) -> Vec<ColumnSelector> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| match s.parse() {
            Ok(i) => ColumnSelector::Index(i),
            Err(_) => ColumnSelector::Name(s.to_string()),
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub samples: Array2<f64>,
    pub header: Option<Vec<String>>,
    /// Rows skipped because a selected field was missing or not a number.
    pub dropped: usize,
}

fn parse_field(field: Option<&str>) -> Option<f64> {
    let v: f64 = field?.trim().parse().ok()?;
    v.is_finite().then_some(v)
}

/// Reads a comma-separated file of samples, one per row.
///
/// The first row is taken as a header when none of its fields parses as a
/// number. Without `columns` every column of the first row is used.
pub fn read_samples_csv(path: &Path, columns: Option<&[ColumnSelector]>) -> CliResult<Ingested> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut records = reader.records();
    let first = match records.next() {
        Some(r) => r?,
        None => return Err(CliError::Ingest(format!("{} is empty", path.display()))),
    };
    let is_header = first.iter().all(|f| f.parse::<f64>().is_err());
    let header: Option<Vec<String>> = is_header.then(|| first.iter().map(str::to_string).collect());

    let selected: Vec<usize> = match columns {
        None => (0..first.len()).collect(),
        Some(sel) => sel
            .iter()
            .map(|c| match c {
                ColumnSelector::Index(i) => Ok(*i),
                ColumnSelector::Name(name) => header
                    .as_ref()
                    .and_then(|h| h.iter().position(|f| f == name))
                    .ok_or_else(|| CliError::Usage(format!("no column named '{name}'"))),
            })
            .collect::<CliResult<_>>()?,
    };
    if selected.is_empty() {
        return Err(CliError::Usage("no columns selected".into()));
    }

    let mut values = Vec::new();
    let mut rows = 0;
    let mut dropped = 0;
    let mut take = |rec: &csv::StringRecord| {
        let row: Option<Vec<f64>> = selected.iter().map(|&c| parse_field(rec.get(c))).collect();
        match row {
            Some(r) => {
                values.extend(r);
                rows += 1;
            }
            None => dropped += 1,
        }
    };
    if !is_header {
        take(&first);
    }
    for rec in records {
        take(&rec?);
    }
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} rows with missing or non-numeric fields", path.display());
    }
    if rows == 0 {
        return Err(CliError::Ingest(format!("{} has no valid rows", path.display())));
    }
    let samples = Array2::from_shape_vec((rows, selected.len()), values)
        .map_err(|e| CliError::Ingest(e.to_string()))?;
    Ok(Ingested {
        samples,
        header,
        dropped,
    })
}

/// Writes samples as header-less CSV with shortest round-trip float formatting.
pub fn write_samples_csv(path: &Path, samples: &Array2<f64>) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    for row in samples.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_lists() {
        assert_eq!(
            parse_columns("0, 2,age"),
            vec![
                ColumnSelector::Index(0),
                ColumnSelector::Index(2),
                ColumnSelector::Name("age".into())
            ]
        );
    }
}
