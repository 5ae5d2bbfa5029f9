//! CSV telemetry: `#` metadata lines, a header row, one row per record.
//!
//! Values are written with the shortest representation that parses back to
//! the same `f64`, so a round trip is exact.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::scenario::{column_names, LogRecord, COLUMN_COUNT};

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: row {row}: {message}")]
    Malformed { path: PathBuf, row: usize, message: String },
}

/// Writes metadata, header and rows to any writer.
pub fn write_log<W: Write>(
    mut out: W,
    metadata: &[(&str, String)],
    records: &[LogRecord],
    trailer: Option<&str>,
) -> std::io::Result<()> {
    for (key, value) in metadata {
        writeln!(out, "# {key}: {value}")?;
    }
    {
        let mut csv = csv::Writer::from_writer(&mut out);
        csv.write_record(column_names())?;
        for r in records {
            csv.write_record(r.values().iter().map(|v| v.to_string()))?;
        }
        csv.flush()?;
    }
    if let Some(line) = trailer {
        writeln!(out, "# {line}")?;
    }
    out.flush()
}

pub fn write_csv(
    path: &Path,
    metadata: &[(&str, String)],
    records: &[LogRecord],
    trailer: Option<&str>,
) -> Result<(), TelemetryError> {
    let io_err = |source| TelemetryError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    write_log(BufWriter::new(file), metadata, records, trailer).map_err(io_err)
}

/// Parses a log written by [`write_csv`], skipping `#` lines.
pub fn read_csv(path: &Path) -> Result<Vec<LogRecord>, TelemetryError> {
    let csv_err = |source| TelemetryError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(csv_err)?;
    let header: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if header != column_names() {
        return Err(TelemetryError::Malformed {
            path: path.to_path_buf(),
            row: 0,
            message: "unexpected header".into(),
        });
    }
    let mut records = Vec::new();
    for (row, result) in reader.records().enumerate() {
        let fields = result.map_err(csv_err)?;
        let malformed = |message: String| TelemetryError::Malformed {
            path: path.to_path_buf(),
            row: row + 1,
            message,
        };
        let values = fields
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| malformed(format!("{f:?}: {e}"))))
            .collect::<Result<Vec<f64>, _>>()?;
        let record = LogRecord::from_values(&values)
            .ok_or_else(|| malformed(format!("expected {COLUMN_COUNT} fields, got {}", values.len())))?;
        records.push(record);
    }
    Ok(records)
}
