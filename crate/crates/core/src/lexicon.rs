//! Pain-term lexicon loading and compiled multi-pattern matching.
//!
//! Matching is case-insensitive and reports character offsets into the
//! original text. Scanning is single-pass per document via an Aho-Corasick
//! automaton compiled once over all terms.

use std::path::Path;

use aho_corasick::AhoCorasick;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Document;
use crate::hashing::sha256_short_hex;

/// Shipped default term list; `Lexicon::builtin` parses it.
pub const DEFAULT_LEXICON_TEXT: &str = include_str!("../data/pain_lexicon.txt");

/// One lexicon entry. `normalized` is the form that is actually matched:
/// case-folded, with internal whitespace collapsed to single spaces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconTerm {
    pub term_id: usize,
    pub surface: String,
    pub normalized: String,
}

/// A deduplicated, normalized term set plus a content-derived version tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    terms: Vec<LexiconTerm>,
    version: String,
}

/// One occurrence of a term. `start`/`end` are character offsets into the
/// original (unfolded) text; `text[start..end)` case-folds to the term's
/// normalized form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Match {
    pub term_id: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Report a match only when the adjacent characters are absent or
    /// non-alphanumeric (Unicode classification).
    WordBoundary,
    /// Report every occurrence regardless of surroundings.
    Substring,
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("lexicon has no terms after removing comments and blanks")]
    Empty,
    #[error("failed to compile term automaton: {0}")]
    Build(#[from] aho_corasick::BuildError),
}

/// Case-folds one character to at most one character: the lowercase mapping
/// when it is single-character, the original character otherwise. This
/// keeps the folded string's character count equal to the input's, so
/// offsets computed on the folded text are valid on the original.
fn fold1_char(c: char) -> char {
    let mut lower = c.to_lowercase();
    let first = lower.next().expect("to_lowercase yields at least one char");
    if lower.next().is_none() {
        first
    } else {
        c
    }
}

/// Character-count-preserving case fold of a whole string. Byte length may
/// change; character length never does.
pub fn fold1(text: &str) -> String {
    text.chars().map(fold1_char).collect()
}

/// Folds case and collapses runs of whitespace to single spaces, trimming
/// the ends. Multiword phrases therefore match exactly one space between
/// words.
pub fn normalize_term(raw: &str) -> String {
    let folded = fold1(raw);
    let mut out = String::with_capacity(folded.len());
    for word in folded.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

impl Lexicon {
    /// Builds a lexicon from raw term strings: normalizes, drops blanks,
    /// deduplicates on the normalized form (first surface wins), and sorts
    /// by normalized form so term ids are stable.
    pub fn new<I, S>(raw_terms: I) -> Result<Self, LexiconError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut entries: Vec<(String, String)> = Vec::new();
        for raw in raw_terms {
            let surface = raw.as_ref().trim().to_string();
            let normalized = normalize_term(&surface);
            if normalized.is_empty() {
                continue;
            }
            entries.push((normalized, surface));
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        entries.dedup_by(|later, first| later.0 == first.0);
        if entries.is_empty() {
            return Err(LexiconError::Empty);
        }

        let joined: String = entries
            .iter()
            .map(|(n, _)| n.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        let version = sha256_short_hex(joined.as_bytes(), 12);

        let terms = entries
            .into_iter()
            .enumerate()
            .map(|(term_id, (normalized, surface))| LexiconTerm {
                term_id,
                surface,
                normalized,
            })
            .collect();
        Ok(Lexicon { terms, version })
    }

    /// Loads a lexicon file: one term per line, `#` comments and blank
    /// lines ignored.
    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        let raw = std::fs::read_to_string(path).map_err(|e| LexiconError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_file_text(&raw)
    }

    /// Parses lexicon file syntax from an in-memory string.
    pub fn from_file_text(raw: &str) -> Result<Self, LexiconError> {
        let lines = raw
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        Self::new(lines)
    }

    /// The shipped default pain lexicon.
    pub fn builtin() -> Self {
        Self::from_file_text(DEFAULT_LEXICON_TEXT).expect("embedded lexicon is valid")
    }

    pub fn terms(&self) -> &[LexiconTerm] {
        &self.terms
    }

    pub fn term(&self, term_id: usize) -> &LexiconTerm {
        &self.terms[term_id]
    }

    /// Content hash of the normalized term set; changes iff the effective
    /// term set changes.
    pub fn version(&self) -> &str {
        &self.version
    }

    /// Compiles the matching automaton. The result is immutable and safe to
    /// share across threads.
    pub fn compile(&self) -> Result<LexiconMatcher<'_>, LexiconError> {
        let patterns: Vec<&str> = self.terms.iter().map(|t| t.normalized.as_str()).collect();
        let automaton = AhoCorasick::new(&patterns)?;
        let char_lens = self
            .terms
            .iter()
            .map(|t| t.normalized.chars().count())
            .collect();
        Ok(LexiconMatcher {
            lexicon: self,
            automaton,
            char_lens,
        })
    }
}

/// A compiled matcher borrowing its lexicon.
pub struct LexiconMatcher<'a> {
    lexicon: &'a Lexicon,
    automaton: AhoCorasick,
    char_lens: Vec<usize>,
}

impl<'a> LexiconMatcher<'a> {
    pub fn lexicon(&self) -> &'a Lexicon {
        self.lexicon
    }

    /// Finds every occurrence of every term, including overlapping ones,
    /// sorted by (start, end). Offsets are character offsets into `text`.
    pub fn find_matches(&self, text: &str, mode: MatchMode) -> Vec<Match> {
        let folded = fold1(text);

        // Byte-offset hits on the folded text, filtered by boundary rule.
        let mut hits: Vec<(usize, usize, usize)> = Vec::new(); // (start_byte, end_byte, term_id)
        for m in self.automaton.find_overlapping_iter(folded.as_str()) {
            if mode == MatchMode::WordBoundary {
                let before_ok = folded[..m.start()]
                    .chars()
                    .next_back()
                    .is_none_or(|c| !c.is_alphanumeric());
                let after_ok = folded[m.end()..]
                    .chars()
                    .next()
                    .is_none_or(|c| !c.is_alphanumeric());
                if !before_ok || !after_ok {
                    continue;
                }
            }
            hits.push((m.start(), m.end(), m.pattern().as_usize()));
        }
        if hits.is_empty() {
            return Vec::new();
        }
        hits.sort_unstable();

        // Convert start bytes to character offsets in one pass. The end
        // offset is start + the pattern's character count, which is exact
        // because the folded text equals the pattern over the match and
        // fold1 preserves character counts.
        let mut out = Vec::with_capacity(hits.len());
        let mut next = 0;
        for (char_idx, (byte_idx, _)) in folded.char_indices().enumerate() {
            while next < hits.len() && hits[next].0 == byte_idx {
                let (_, _, term_id) = hits[next];
                out.push(Match {
                    term_id,
                    start: char_idx,
                    end: char_idx + self.char_lens[term_id],
                });
                next += 1;
            }
            if next == hits.len() {
                break;
            }
        }
        debug_assert_eq!(next, hits.len());
        out
    }
}

/// Keeps only documents with at least one match, in input order, pairing
/// each with its match list. No other filtering is applied.
pub fn filter_documents<'d>(
    matcher: &LexiconMatcher,
    docs: &'d [Document],
    mode: MatchMode,
) -> Vec<(&'d Document, Vec<Match>)> {
    docs.iter()
        .filter_map(|doc| {
            let matches = matcher.find_matches(&doc.text, mode);
            if matches.is_empty() {
                None
            } else {
                Some((doc, matches))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lexicon(terms: &[&str]) -> Lexicon {
        Lexicon::new(terms.iter().copied()).unwrap()
    }

    fn find(lex: &Lexicon, text: &str, mode: MatchMode) -> Vec<(usize, usize)> {
        lex.compile()
            .unwrap()
            .find_matches(text, mode)
            .iter()
            .map(|m| (m.start, m.end))
            .collect()
    }

    #[test]
    fn skips_comments_and_blanks_and_dedups() {
        let lex = Lexicon::from_file_text("pain\n# comment\n\nheadache\nPain\n").unwrap();
        let normalized: Vec<&str> = lex.terms().iter().map(|t| t.normalized.as_str()).collect();
        assert_eq!(normalized, vec!["headache", "pain"]);
    }

    #[test]
    fn empty_effective_term_set_is_an_error() {
        assert!(matches!(
            Lexicon::from_file_text("# only comments\n\n"),
            Err(LexiconError::Empty)
        ));
    }

    #[test]
    fn version_is_stable_and_content_derived() {
        let a = Lexicon::from_file_text("pain\nheadache\n").unwrap();
        let b = Lexicon::from_file_text("headache\n# note\nPAIN\n").unwrap();
        let c = Lexicon::from_file_text("pain\nmigraine\n").unwrap();
        assert_eq!(a.version(), b.version());
        assert_ne!(a.version(), c.version());
        assert_eq!(a.version().len(), 12);
    }

    #[test]
    fn multiword_phrase_matches_as_one_pattern() {
        let lex = lexicon(&["stomach ache"]);
        assert_eq!(
            find(&lex, "has stomach ache", MatchMode::WordBoundary),
            vec![(4, 16)]
        );
    }

    #[test]
    fn word_boundary_excludes_embedded_occurrences() {
        let lex = lexicon(&["pain"]);
        assert_eq!(
            find(&lex, "no pain today, painting class", MatchMode::WordBoundary),
            vec![(3, 7)]
        );
        assert_eq!(find(&lex, "painting", MatchMode::WordBoundary), vec![]);
        assert_eq!(
            find(&lex, "no pain today, painting class", MatchMode::Substring),
            vec![(3, 7), (15, 19)]
        );
    }

    #[test]
    fn matching_is_case_insensitive_and_punctuation_bounds_words() {
        let lex = lexicon(&["pain"]);
        assert_eq!(find(&lex, "PAIN!", MatchMode::WordBoundary), vec![(0, 4)]);
    }

    #[test]
    fn conjoined_tokens_only_match_in_substring_mode() {
        let lex = lexicon(&["pain"]);
        let text = "achespainodd sensations";
        assert_eq!(find(&lex, text, MatchMode::WordBoundary), vec![]);
        assert_eq!(find(&lex, text, MatchMode::Substring), vec![(5, 9)]);
    }

    #[test]
    fn misspelled_neighbor_word_still_matches_the_clean_term() {
        let lex = lexicon(&["pain"]);
        assert_eq!(
            find(&lex, "dabdominal pain", MatchMode::WordBoundary),
            vec![(11, 15)]
        );
    }

    #[test]
    fn overlapping_terms_are_all_reported_in_sorted_order() {
        let lex = lexicon(&["stomach ache", "ache"]);
        let got = find(&lex, "stomach ache", MatchMode::WordBoundary);
        assert_eq!(got, vec![(0, 12), (8, 12)]);
    }

    #[test]
    fn offsets_are_character_based_for_multibyte_text() {
        let lex = lexicon(&["pain"]);
        // 'é' and 'Σ' are multibyte; offsets must still count characters.
        assert_eq!(
            find(&lex, "résumé Σ pain", MatchMode::WordBoundary),
            vec![(9, 13)]
        );
    }

    #[test]
    fn fold1_preserves_character_count() {
        // 'İ' lowercases to two scalar values; fold1 must keep it single.
        for text in ["İstanbul PAIN", "Σ MIXED Case", "ÆØÅ pain"] {
            assert_eq!(fold1(text).chars().count(), text.chars().count());
        }
    }

    #[test]
    fn digits_count_as_word_characters() {
        let lex = lexicon(&["pain"]);
        assert_eq!(find(&lex, "pain2 scale", MatchMode::WordBoundary), vec![]);
        assert_eq!(find(&lex, "pain 2", MatchMode::WordBoundary), vec![(0, 4)]);
    }

    #[test]
    fn filter_documents_keeps_only_matching_docs_in_order() {
        let lex = lexicon(&["pain"]);
        let matcher = lex.compile().unwrap();
        let docs = vec![
            Document::new("d1", "complains of pain"),
            Document::new("d2", "calm and settled"),
            Document::new("d3", "dabdominal pain noted"),
        ];
        let kept = filter_documents(&matcher, &docs, MatchMode::WordBoundary);
        let ids: Vec<&str> = kept.iter().map(|(d, _)| d.doc_id.as_str()).collect();
        assert_eq!(ids, vec!["d1", "d3"]);
        assert_eq!(kept[0].1.len(), 1);
    }

    #[test]
    fn term_normalization_collapses_internal_whitespace() {
        let lex = lexicon(&["  Stomach   Ache "]);
        assert_eq!(lex.terms()[0].normalized, "stomach ache");
        assert_eq!(
            find(&lex, "bad stomach ache", MatchMode::WordBoundary),
            vec![(4, 16)]
        );
    }
}
