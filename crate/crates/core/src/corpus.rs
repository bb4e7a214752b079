//! Corpus ingestion, validation, and rewriting.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::{self, JsonlError};

/// One clinical-style note.
///
/// Every offset elsewhere in the pipeline indexes `text` by Unicode scalar
/// values, never by bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patient_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_type: Option<String>,
    /// Fields this pipeline does not interpret, kept so a rewritten corpus
    /// is lossless.
    #[serde(flatten, default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            doc_id: doc_id.into(),
            text: text.into(),
            patient_id: None,
            source_type: None,
            extra: BTreeMap::new(),
        }
    }

    /// Length of `text` in Unicode scalar values.
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("{path} line {line}: document {doc_id:?} has empty text")]
    EmptyText {
        path: String,
        line: usize,
        doc_id: String,
    },
    #[error("{path} line {line}: duplicate doc_id {doc_id:?}")]
    DuplicateDocId {
        path: String,
        line: usize,
        doc_id: String,
    },
}

/// Loads a corpus file, rejecting empty-text documents and duplicate ids.
/// Documents come back in file order.
pub fn load_corpus(path: &Path) -> Result<Vec<Document>, CorpusError> {
    let rows: Vec<(usize, Document)> = jsonl::read_numbered(path)?;
    let mut seen = HashSet::with_capacity(rows.len());
    let mut docs = Vec::with_capacity(rows.len());
    for (line, doc) in rows {
        if doc.text.is_empty() {
            return Err(CorpusError::EmptyText {
                path: path.display().to_string(),
                line,
                doc_id: doc.doc_id,
            });
        }
        if !seen.insert(doc.doc_id.clone()) {
            return Err(CorpusError::DuplicateDocId {
                path: path.display().to_string(),
                line,
                doc_id: doc.doc_id,
            });
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn save_corpus(path: &Path, docs: &[Document]) -> Result<(), JsonlError> {
    jsonl::write_records(path, docs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_lines(lines: &[&str]) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        std::fs::write(&path, lines.join("\n")).unwrap();
        (dir, path)
    }

    #[test]
    fn loads_documents_in_file_order() {
        let (_dir, path) = write_lines(&[
            r#"{"doc_id":"d1","text":"complains of pain","patient_id":"p1","source_type":"event_note"}"#,
            r#"{"doc_id":"d2","text":"routine review"}"#,
        ]);
        let docs = load_corpus(&path).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].doc_id, "d1");
        assert_eq!(docs[0].patient_id.as_deref(), Some("p1"));
        assert_eq!(docs[0].source_type.as_deref(), Some("event_note"));
        assert_eq!(docs[1].doc_id, "d2");
        assert_eq!(docs[1].patient_id, None);
    }

    #[test]
    fn missing_text_field_names_the_line() {
        let (_dir, path) = write_lines(&[
            r#"{"doc_id":"d1","text":"ok"}"#,
            r#"{"doc_id":"d2","text":"ok"}"#,
            r#"{"doc_id":"d3"}"#,
        ]);
        let msg = load_corpus(&path).unwrap_err().to_string();
        assert!(msg.contains("line 3"), "unexpected message: {msg}");
        assert!(msg.contains("missing field `text`"), "unexpected message: {msg}");
    }

    #[test]
    fn empty_text_is_rejected() {
        let (_dir, path) = write_lines(&[r#"{"doc_id":"d1","text":""}"#]);
        let err = load_corpus(&path).unwrap_err();
        assert!(matches!(err, CorpusError::EmptyText { ref doc_id, line: 1, .. } if doc_id == "d1"));
    }

    #[test]
    fn duplicate_doc_id_is_rejected_with_the_id() {
        let (_dir, path) = write_lines(&[
            r#"{"doc_id":"d1","text":"a"}"#,
            r#"{"doc_id":"d1","text":"b"}"#,
        ]);
        let err = load_corpus(&path).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateDocId { ref doc_id, line: 2, .. } if doc_id == "d1"));
    }

    #[test]
    fn round_trip_preserves_unknown_fields() {
        let (_dir, path) = write_lines(&[
            r#"{"doc_id":"d1","text":"a","ward":"B3","flags":[1,2]}"#,
            r#"{"doc_id":"d2","text":"b","patient_id":"p9"}"#,
        ]);
        let docs = load_corpus(&path).unwrap();
        assert_eq!(docs[0].extra["ward"], serde_json::json!("B3"));

        let dir2 = tempfile::tempdir().unwrap();
        let out = dir2.path().join("rewritten.jsonl");
        save_corpus(&out, &docs).unwrap();
        let back = load_corpus(&out).unwrap();
        assert_eq!(back, docs);
    }
}
