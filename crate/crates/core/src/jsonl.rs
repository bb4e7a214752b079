//! Line-delimited JSON IO shared by every file format in the pipeline.
//!
//! One record per line; blank lines are skipped. Errors carry the path and
//! the 1-based line number so data problems are reportable without a
//! debugger.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {source}")]
    Malformed {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: failed to encode record: {source}")]
    Encode {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> JsonlError {
    JsonlError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads all records with their 1-based line numbers, in file order.
pub fn read_numbered<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, JsonlError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| JsonlError::Malformed {
            path: path.display().to_string(),
            line: idx + 1,
            source: e,
        })?;
        records.push((idx + 1, record));
    }
    Ok(records)
}

/// Reads all records in file order, discarding line numbers.
pub fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, JsonlError> {
    Ok(read_numbered(path)?.into_iter().map(|(_, r)| r).collect())
}

/// Writes one record per line. Output is byte-deterministic for a given
/// record sequence: struct fields serialize in declaration order and maps
/// used in these types are ordered.
pub fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<(), JsonlError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record).map_err(|e| JsonlError::Encode {
            path: path.display().to_string(),
            source: e,
        })?;
        writer.write_all(line.as_bytes()).map_err(|e| io_err(path, e))?;
        writer.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    writer.flush().map_err(|e| io_err(path, e))
}

/// Writes a single pretty-printed JSON document with a trailing newline.
/// Used for reports and manifests.
pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<(), JsonlError> {
    let body = serde_json::to_string_pretty(value).map_err(|e| JsonlError::Encode {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut file = File::create(path).map_err(|e| io_err(path, e))?;
    file.write_all(body.as_bytes()).map_err(|e| io_err(path, e))?;
    file.write_all(b"\n").map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Row {
        id: String,
        n: u32,
    }

    #[test]
    fn round_trips_records_and_skips_blank_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.jsonl");
        let rows = vec![
            Row { id: "a".into(), n: 1 },
            Row { id: "b".into(), n: 2 },
        ];
        write_records(&path, &rows).unwrap();

        let mut raw = std::fs::read_to_string(&path).unwrap();
        raw.push_str("\n\n");
        std::fs::write(&path, raw).unwrap();

        let back: Vec<Row> = read_records(&path).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.jsonl");
        std::fs::write(&path, "{\"id\":\"a\",\"n\":1}\n{\"id\":\"b\"}\n").unwrap();
        let err = read_records::<Row>(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "unexpected message: {msg}");
        assert!(msg.contains("missing field `n`"), "unexpected message: {msg}");
    }

    #[test]
    fn missing_file_reports_path() {
        let err = read_records::<Row>(Path::new("/nonexistent/rows.jsonl")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/rows.jsonl"));
    }
}
