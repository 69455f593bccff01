//! Reading one numeric column from a CSV file.

use crate::error::{CliError, CliResult};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::Path;

/// Cells treated as missing, besides empty ones.
const MISSING: [&str; 5] = ["NA", "na", "N/A", "NaN", "."];

/// Lines listed individually when rejecting nonpositive values.
const MAX_LISTED: usize = 10;

#[derive(Debug, Clone, Serialize)]
pub struct Ingested {
    pub path: String,
    pub sha256: String,
    pub column: String,
    #[serde(skip)]
    pub values: Vec<f64>,
    pub rows_used: usize,
    pub missing_dropped: usize,
    pub nonpositive_dropped: usize,
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || MISSING.contains(&cell)
}

/// Reads `column` (a header name or a 0-based index; the first column if
/// `None`) from `path`. A first row whose selected cell is not a number is
/// taken as the header.
pub fn ingest(path: &Path, column: Option<&str>, drop_nonpositive: bool) -> CliResult<Ingested> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let sha256 = hex::encode(Sha256::digest(&bytes));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        // `Position::line` does not count skipped blank lines, and the byte
        // offset can point at the line break before the record.
        let mut byte = rec.position().map_or(0, |p| p.byte() as usize);
        while byte < bytes.len() && matches!(bytes[byte], b'\n' | b'\r') {
            byte += 1;
        }
        let line = 1 + bytes[..byte].iter().filter(|&&b| b == b'\n').count() as u64;
        records.push((line, rec));
    }
    // Skip leading blank lines.
    let first = records
        .iter()
        .position(|(_, r)| r.iter().any(|c| !c.is_empty()))
        .ok_or_else(|| CliError::Data(format!("{}: no data", path.display())))?;
    let records = &records[first..];

    let header = &records[0].1;
    let by_name = column.and_then(|c| header.iter().position(|h| h == c));
    let index = match (column, by_name) {
        (None, _) => 0,
        (Some(_), Some(i)) => i,
        (Some(c), None) => c.parse::<usize>().map_err(|_| {
            CliError::Usage(format!(
                "column '{c}' not found in the header of {}",
                path.display()
            ))
        })?,
    };
    let has_header = by_name.is_some()
        || header
            .get(index)
            .is_some_and(|cell| !is_missing(cell) && cell.parse::<f64>().is_err());
    let column_name = if has_header {
        header.get(index).unwrap_or_default().to_string()
    } else {
        index.to_string()
    };
    if !has_header && header.len() <= index {
        return Err(CliError::Usage(format!(
            "column {index} out of range ({} columns in {})",
            header.len(),
            path.display()
        )));
    }

    let mut values = Vec::new();
    // The CSV reader skips blank lines; in a single-column file they are
    // missing values too.
    let mut missing = blank_lines_after(&bytes, records[0].0);
    let mut nonpositive = Vec::new();
    for (line, rec) in &records[usize::from(has_header)..] {
        let cell = rec.get(index).unwrap_or("");
        if is_missing(cell) {
            missing += 1;
            continue;
        }
        let v: f64 = cell
            .parse()
            .map_err(|_| CliError::Data(format!("line {line}: '{cell}' is not a number")))?;
        if !v.is_finite() {
            missing += 1;
        } else if v <= 0.0 {
            nonpositive.push(*line);
        } else {
            values.push(v);
        }
    }
    if !nonpositive.is_empty() && !drop_nonpositive {
        let listed: Vec<String> = nonpositive
            .iter()
            .take(MAX_LISTED)
            .map(u64::to_string)
            .collect();
        let more = if nonpositive.len() > MAX_LISTED {
            ", ..."
        } else {
            ""
        };
        return Err(CliError::Data(format!(
            "{} nonpositive value(s) at line(s) {}{more}; pass --drop-nonpositive to discard them",
            nonpositive.len(),
            listed.join(", ")
        )));
    }
    if missing > 0 {
        log::info!("dropped {missing} missing value(s)");
    }
    if !nonpositive.is_empty() {
        log::warn!("dropped {} nonpositive value(s)", nonpositive.len());
    }
    if values.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no usable observations",
            path.display()
        )));
    }
    Ok(Ingested {
        path: path.display().to_string(),
        sha256,
        column: column_name,
        rows_used: values.len(),
        values,
        missing_dropped: missing,
        nonpositive_dropped: nonpositive.len(),
    })
}

/// Whitespace-only lines after line `first`, not counting trailing ones.
fn blank_lines_after(bytes: &[u8], first: u64) -> usize {
    let text = String::from_utf8_lossy(bytes);
    let lines: Vec<&str> = text.lines().skip(first as usize).collect();
    let end = lines
        .iter()
        .rposition(|l| !l.trim().is_empty())
        .map_or(0, |i| i + 1);
    lines[..end].iter().filter(|l| l.trim().is_empty()).count()
}

/// Divides by the sample mean; returns the rescaled sample and the mean.
pub fn rescale_to_unit_mean(values: &[f64]) -> (Vec<f64>, f64) {
    let c = lltkde::stats::mean(values);
    (values.iter().map(|v| v / c).collect(), c)
}
