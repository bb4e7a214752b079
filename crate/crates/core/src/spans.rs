//! Candidate-span extraction: the character window around each lexicon hit
//! that annotators label and classifiers consume.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Document;
use crate::jsonl::{self, JsonlError};
use crate::hashing::sha256_short_hex;
use crate::lexicon::{LexiconMatcher, Match, MatchMode};

pub const DEFAULT_WINDOW: usize = 200;

/// A window of document text around one triggering term. All offsets are
/// character offsets into the document; `text` is the window substring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSpan {
    pub span_id: String,
    pub doc_id: String,
    pub window_start: usize,
    pub window_end: usize,
    pub term_start: usize,
    pub term_end: usize,
    pub text: String,
}

#[derive(Debug, Error)]
pub enum SpanError {
    #[error("window size must be at least 1")]
    ZeroWindow,
    #[error("document {doc_id}: match [{start},{end}) is out of range (text length {len})")]
    MatchOutOfRange {
        doc_id: String,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("{path} line {line}: duplicate span_id {span_id:?}")]
    DuplicateSpanId {
        path: String,
        line: usize,
        span_id: String,
    },
}

/// Deterministic span identity: a hash of the document id and the window
/// offsets, so re-extraction reproduces the ids that annotation files
/// reference.
pub fn span_id(doc_id: &str, window_start: usize, window_end: usize) -> String {
    let key = format!("{doc_id}\x00{window_start}\x00{window_end}");
    sha256_short_hex(key.as_bytes(), 16)
}

/// Slice of `text` between character offsets `[start, end)`.
fn char_slice(text: &str, start: usize, end: usize) -> &str {
    debug_assert!(start <= end);
    let mut indices = text.char_indices().map(|(b, _)| b);
    let start_byte = indices.by_ref().nth(start).unwrap_or(text.len());
    let end_byte = if end > start {
        indices.nth(end - start - 1).unwrap_or(text.len())
    } else {
        start_byte
    };
    &text[start_byte..end_byte]
}

/// Converts matches into windows of `window` characters before and after
/// each term, clamped at the document boundaries. Output is sorted by
/// (window_start, window_end); spans with identical windows collapse to
/// one, keeping the first triggering match.
pub fn extract_spans(
    doc: &Document,
    matches: &[Match],
    window: usize,
) -> Result<Vec<CandidateSpan>, SpanError> {
    if window == 0 {
        return Err(SpanError::ZeroWindow);
    }
    let len = doc.char_len();
    let mut windows: Vec<(usize, usize, &Match)> = Vec::with_capacity(matches.len());
    for m in matches {
        if m.start >= m.end || m.end > len {
            return Err(SpanError::MatchOutOfRange {
                doc_id: doc.doc_id.clone(),
                start: m.start,
                end: m.end,
                len,
            });
        }
        let window_start = m.start.saturating_sub(window);
        let window_end = (m.end + window).min(len);
        windows.push((window_start, window_end, m));
    }
    // Stable sort: equal windows keep match order, so dedup retains the
    // earliest triggering match.
    windows.sort_by_key(|(ws, we, _)| (*ws, *we));
    windows.dedup_by_key(|(ws, we, _)| (*ws, *we));

    Ok(windows
        .into_iter()
        .map(|(window_start, window_end, m)| CandidateSpan {
            span_id: span_id(&doc.doc_id, window_start, window_end),
            doc_id: doc.doc_id.clone(),
            window_start,
            window_end,
            term_start: m.start,
            term_end: m.end,
            text: char_slice(&doc.text, window_start, window_end).to_string(),
        })
        .collect())
}

/// Runs the matcher over every document and extracts spans, concatenated in
/// corpus order.
pub fn extract_spans_corpus(
    docs: &[Document],
    matcher: &LexiconMatcher,
    mode: MatchMode,
    window: usize,
) -> Result<Vec<CandidateSpan>, SpanError> {
    let mut spans = Vec::new();
    for doc in docs {
        let matches = matcher.find_matches(&doc.text, mode);
        spans.extend(extract_spans(doc, &matches, window)?);
    }
    Ok(spans)
}

/// Loads a span file, rejecting duplicate span ids.
pub fn load_spans(path: &Path) -> Result<Vec<CandidateSpan>, SpanError> {
    let rows: Vec<(usize, CandidateSpan)> = jsonl::read_numbered(path)?;
    let mut seen = HashSet::with_capacity(rows.len());
    let mut spans = Vec::with_capacity(rows.len());
    for (line, span) in rows {
        if !seen.insert(span.span_id.clone()) {
            return Err(SpanError::DuplicateSpanId {
                path: path.display().to_string(),
                line,
                span_id: span.span_id,
            });
        }
        spans.push(span);
    }
    Ok(spans)
}

pub fn save_spans(path: &Path, spans: &[CandidateSpan]) -> Result<(), JsonlError> {
    jsonl::write_records(path, spans)
}
