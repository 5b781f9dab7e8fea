// SPDX-License-Identifier: MIT OR Apache-2.0

//! CSV ingestion, atomic output and content digests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use timeinf::TimeSeries;

use crate::error::CliError;

/// Rows of a numeric CSV plus its column names.
#[derive(Debug, Clone)]
pub struct Table {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

fn read_records(path: &Path) -> Result<Vec<csv::StringRecord>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    reader
        .records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Reads a numeric table with an optional header row. With `skip_first`
/// the leading (timestamp) column is dropped before parsing.
pub fn read_table(path: &Path, skip_first: bool) -> Result<Table, CliError> {
    let records = read_records(path)?;
    let skip = usize::from(skip_first);
    let fields = |r: &csv::StringRecord| r.iter().skip(skip).map(str::to_owned).collect::<Vec<_>>();
    let Some(first) = records.first() else {
        return Err(CliError::Input(format!("{} is empty", path.display())));
    };
    let head = fields(first);
    if head.is_empty() {
        return Err(CliError::Input(format!("{} has no data columns", path.display())));
    }
    let has_header = head.iter().any(|f| f.parse::<f64>().is_err());
    let names = if has_header {
        head.clone()
    } else {
        (0..head.len()).map(|i| format!("x{i}")).collect()
    };
    let mut columns = vec![Vec::new(); names.len()];
    for (row, record) in records.iter().enumerate().skip(usize::from(has_header)) {
        let values = fields(record);
        if values.len() != names.len() {
            return Err(CliError::Input(format!(
                "{} row {}: expected {} fields, found {}",
                path.display(),
                row + 1,
                names.len(),
                values.len()
            )));
        }
        for (col, v) in columns.iter_mut().zip(values) {
            let x: f64 = v
                .parse()
                .map_err(|_| CliError::Input(format!("{} row {}: '{v}' is not a number", path.display(), row + 1)))?;
            col.push(x);
        }
    }
    if columns[0].is_empty() {
        return Err(CliError::Input(format!("{} has no data rows", path.display())));
    }
    Ok(Table { names, columns })
}

pub fn read_series(path: &Path, timestamp: bool) -> Result<TimeSeries, CliError> {
    let table = read_table(path, timestamp)?;
    TimeSeries::from_columns(table.columns, table.names).map_err(|e| CliError::Input(e.to_string()))
}

/// Reads a single 0/1 column.
pub fn read_labels(path: &Path) -> Result<Vec<u8>, CliError> {
    let table = read_table(path, false)?;
    if table.columns.len() != 1 {
        return Err(CliError::Input(format!("{} must have exactly one column", path.display())));
    }
    table.columns[0]
        .iter()
        .enumerate()
        .map(|(i, v)| match *v {
            0.0 => Ok(0),
            1.0 => Ok(1),
            _ => Err(CliError::Input(format!("{} row {}: label {v} is not 0/1", path.display(), i + 1))),
        })
        .collect()
}

/// Reads the `score` column of a scores file, or the only column of a
/// single-column file.
pub fn read_scores(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut table = read_table(path, false)?;
    if let Some(i) = table.names.iter().position(|n| n == "score") {
        return Ok(table.columns.swap_remove(i));
    }
    if table.columns.len() == 1 {
        return Ok(table.columns.swap_remove(0));
    }
    Err(CliError::Input(format!("{} has no 'score' column", path.display())))
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let output = |e: std::io::Error| CliError::Output(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(output)?;
    tmp.write_all(bytes).map_err(output)?;
    tmp.as_file().sync_all().map_err(output)?;
    tmp.persist(path).map_err(|e| output(e.error))?;
    Ok(())
}

/// First 64 bits of the SHA-256 of a file's content, as hex.
pub fn digest_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    Ok(digest_bytes(&bytes))
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    let hash = Sha256::digest(bytes);
    let mut word = [0u8; 8];
    word.copy_from_slice(&hash[..8]);
    format!("{:016x}", u64::from_be_bytes(word))
}

/// CSV text from a header and rows of already formatted fields.
pub fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Output(e.to_string());
    writer.write_record(header).map_err(fail)?;
    for row in rows {
        writer.write_record(&row).map_err(fail)?;
    }
    writer.into_inner().map_err(|e| CliError::Output(e.to_string()))
}
