//! Deterministic text preprocessing and TF-IDF featurization.
//!
//! Preprocessing is a fixed pipeline of tokenize, lowercase, punctuation
//! removal, stopword removal, and rule-based lemmatization. Featurization
//! is raw term counts weighted by smoothed inverse document frequency and
//! L2-normalized. Everything here is a pure function of its inputs, so
//! fitted models are reproducible byte for byte.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");
const DEFAULT_LEMMA_EXCEPTIONS: &str = include_str!("../data/lemma_exceptions.tsv");

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("cannot fit a vectorizer on zero spans")]
    EmptyCorpus,
    #[error("all spans preprocess to empty token lists; vocabulary would be empty")]
    EmptyVocabulary,
    #[error("invalid sparse vector: {0}")]
    InvalidVector(String),
    #[error("lemma exception table: {0}")]
    BadLemmaTable(String),
}

/// Preprocessing switches plus the word lists they consult. The shipped
/// defaults enable every step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub lowercase: bool,
    pub remove_stopwords: bool,
    pub remove_punctuation: bool,
    pub lemmatize: bool,
    stopwords: BTreeSet<String>,
    lemma_exceptions: BTreeMap<String, String>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            lowercase: true,
            remove_stopwords: true,
            remove_punctuation: true,
            lemmatize: true,
            stopwords: parse_stopwords(DEFAULT_STOPWORDS),
            lemma_exceptions: parse_lemma_exceptions(DEFAULT_LEMMA_EXCEPTIONS)
                .expect("embedded lemma table is valid"),
        }
    }
}

impl PreprocessConfig {
    pub fn stopwords(&self) -> &BTreeSet<String> {
        &self.stopwords
    }

    pub fn lemma_exceptions(&self) -> &BTreeMap<String, String> {
        &self.lemma_exceptions
    }

    /// Flag summary in a stable shape for reports.
    pub fn flag_summary(&self) -> serde_json::Value {
        serde_json::json!({
            "lowercase": self.lowercase,
            "remove_stopwords": self.remove_stopwords,
            "remove_punctuation": self.remove_punctuation,
            "lemmatize": self.lemmatize,
        })
    }
}

/// One stopword per line, lowercase.
pub fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

/// Tab-separated "form<TAB>lemma" lines. To keep lemmatization a provably
/// terminating fixpoint, a lemma may never itself appear as a form.
pub fn parse_lemma_exceptions(text: &str) -> Result<BTreeMap<String, String>, FeatureError> {
    let mut table = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (form, lemma) = line.split_once('\t').ok_or_else(|| {
            FeatureError::BadLemmaTable(format!("line {}: expected form<TAB>lemma", idx + 1))
        })?;
        table.insert(form.trim().to_string(), lemma.trim().to_string());
    }
    for lemma in table.values() {
        if table.contains_key(lemma) {
            return Err(FeatureError::BadLemmaTable(format!(
                "lemma {lemma:?} is also listed as a form; chains are not allowed"
            )));
        }
    }
    Ok(table)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum CharClass {
    Word,
    Punct,
    Space,
}

fn classify(c: char) -> CharClass {
    if c.is_alphanumeric() {
        CharClass::Word
    } else if c.is_whitespace() {
        CharClass::Space
    } else {
        CharClass::Punct
    }
}

/// Splits at every transition between alphanumeric runs and everything
/// else. Whitespace separates tokens and is never emitted; punctuation
/// runs are emitted as their own tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut class = CharClass::Space;
    for c in text.chars() {
        let next = classify(c);
        if next != class && !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
        class = next;
        if next != CharClass::Space {
            current.push(c);
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

fn is_doubling_consonant(c: char) -> bool {
    c.is_ascii_alphabetic() && !matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

/// One pass of the ordered suffix rules; returns the input unchanged when
/// no rule applies.
fn apply_suffix_rule(token: &str) -> String {
    let chars: Vec<char> = token.chars().collect();
    let n = chars.len();
    let stem_len_ok = |suffix: usize| n >= suffix + 3;
    let ends = |suffix: &str| token.ends_with(suffix);

    if ends("ies") {
        let mut out: String = chars[..n - 3].iter().collect();
        out.push('y');
        return out;
    }
    if ends("es") && stem_len_ok(2) {
        let stem: String = chars[..n - 2].iter().collect();
        // Only the e-insertion plurals: boxes, waltzes, glasses. Other
        // -es words keep their final e via the plain -s rule below.
        if stem.ends_with('x') || stem.ends_with('z') || stem.ends_with("ss") {
            return stem;
        }
    }
    if ends("s") && !ends("ss") && stem_len_ok(1) {
        return chars[..n - 1].iter().collect();
    }
    for suffix in ["ing", "ed"] {
        if ends(suffix) && stem_len_ok(suffix.len()) {
            let mut stem: Vec<char> = chars[..n - suffix.len()].to_vec();
            let m = stem.len();
            if m >= 2 && stem[m - 1] == stem[m - 2] && is_doubling_consonant(stem[m - 1]) {
                stem.pop();
            }
            return stem.into_iter().collect();
        }
    }
    token.to_string()
}

/// Dictionary-plus-rules lemmatizer, iterated to a fixpoint so that
/// lemmatize(lemmatize(t)) == lemmatize(t) for every token. The exception
/// table is consulted first at each step; `parse_lemma_exceptions` rejects
/// tables where that could loop. Expects lowercase input.
pub fn lemmatize(token: &str, exceptions: &BTreeMap<String, String>) -> String {
    let mut current = token.to_string();
    // Rules strictly shorten and dictionary hits cannot chain, so this
    // bound is never reached with a validated table.
    let max_steps = current.chars().count() + 8;
    for _ in 0..max_steps {
        if let Some(lemma) = exceptions.get(&current) {
            if *lemma == current {
                break;
            }
            current = lemma.clone();
            continue;
        }
        let next = apply_suffix_rule(&current);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

/// Runs the configured steps in order: lowercase, punctuation-token
/// removal, stopword removal, lemmatization. Lemmas that land on a
/// stopword are also dropped, which keeps the whole pipeline idempotent.
pub fn preprocess(text: &str, config: &PreprocessConfig) -> Vec<String> {
    let mut tokens = tokenize(text);
    if config.lowercase {
        tokens = tokens.iter().map(|t| t.to_lowercase()).collect();
    }
    if config.remove_punctuation {
        tokens.retain(|t| t.chars().any(char::is_alphanumeric));
    }
    if config.remove_stopwords {
        tokens.retain(|t| !config.stopwords.contains(t));
    }
    if config.lemmatize {
        tokens = tokens
            .iter()
            .map(|t| lemmatize(t, &config.lemma_exceptions))
            .collect();
        if config.remove_stopwords {
            tokens.retain(|t| !config.stopwords.contains(t));
        }
    }
    tokens
}

/// Sorted sparse vector with a fixed dimension. Indices are strictly
/// increasing and values are finite and nonzero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub dim: usize,
    pub entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn new(dim: usize, entries: Vec<(usize, f64)>) -> Result<Self, FeatureError> {
        let mut last: Option<usize> = None;
        for &(idx, value) in &entries {
            if idx >= dim {
                return Err(FeatureError::InvalidVector(format!(
                    "index {idx} out of range for dimension {dim}"
                )));
            }
            if last.is_some_and(|prev| prev >= idx) {
                return Err(FeatureError::InvalidVector(
                    "indices must be strictly increasing".into(),
                ));
            }
            if !value.is_finite() || value == 0.0 {
                return Err(FeatureError::InvalidVector(format!(
                    "value at index {idx} must be finite and nonzero, got {value}"
                )));
            }
            last = Some(idx);
        }
        Ok(SparseVector { dim, entries })
    }

    pub fn zero(dim: usize) -> Self {
        SparseVector { dim, entries: Vec::new() }
    }

    /// Drops exact zeros; rejects non-finite entries.
    pub fn from_dense(values: &[f64]) -> Result<Self, FeatureError> {
        let entries: Vec<(usize, f64)> = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, *v))
            .collect();
        Self::new(values.len(), entries)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(idx, value) in &self.entries {
            out[idx] = value;
        }
        out
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let mut sum = 0.0;
        let (mut i, mut j) = (0, 0);
        while i < self.entries.len() && j < other.entries.len() {
            let (ia, va) = self.entries[i];
            let (ib, vb) = other.entries[j];
            match ia.cmp(&ib) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    sum += va * vb;
                    i += 1;
                    j += 1;
                }
            }
        }
        sum
    }

    /// Dot product against a dense weight vector of the same dimension.
    pub fn dot_dense(&self, weights: &[f64]) -> f64 {
        self.entries.iter().map(|&(idx, v)| weights[idx] * v).sum()
    }

    /// Squared Euclidean distance via a merge walk. Terms accumulate in
    /// ascending index order, matching a dense loop exactly (skipped
    /// zero-zero terms contribute exactly 0.0).
    pub fn squared_distance(&self, other: &SparseVector) -> f64 {
        let mut sum = 0.0;
        let (mut i, mut j) = (0, 0);
        while i < self.entries.len() || j < other.entries.len() {
            let ia = self.entries.get(i).map(|e| e.0);
            let ib = other.entries.get(j).map(|e| e.0);
            match (ia, ib) {
                (Some(a), Some(b)) if a == b => {
                    let d = self.entries[i].1 - other.entries[j].1;
                    sum += d * d;
                    i += 1;
                    j += 1;
                }
                (Some(a), Some(b)) if a < b => {
                    let d = self.entries[i].1;
                    sum += d * d;
                    i += 1;
                }
                (Some(_), Some(_)) => {
                    let d = other.entries[j].1;
                    sum += d * d;
                    j += 1;
                }
                (Some(_), None) => {
                    let d = self.entries[i].1;
                    sum += d * d;
                    i += 1;
                }
                (None, Some(_)) => {
                    let d = other.entries[j].1;
                    sum += d * d;
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        sum
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(_, v)| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Serialize, Deserialize)]
struct TfidfData {
    terms: Vec<String>,
    idf: Vec<f64>,
}

/// Fitted vocabulary and idf table. Column order is first-seen order over
/// the fitting corpus; idf uses the smoothed convention
/// ln((1 + N) / (1 + df)) + 1, which is always >= 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "TfidfData", into = "TfidfData")]
pub struct TfidfModel {
    terms: Vec<String>,
    idf: Vec<f64>,
    lookup: HashMap<String, usize>,
}

impl From<TfidfData> for TfidfModel {
    fn from(data: TfidfData) -> Self {
        let lookup = data
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        TfidfModel { terms: data.terms, idf: data.idf, lookup }
    }
}

impl From<TfidfModel> for TfidfData {
    fn from(model: TfidfModel) -> Self {
        TfidfData { terms: model.terms, idf: model.idf }
    }
}

impl TfidfModel {
    /// Fits vocabulary and idf over the given token lists.
    pub fn fit(token_docs: &[Vec<String>]) -> Result<Self, FeatureError> {
        if token_docs.is_empty() {
            return Err(FeatureError::EmptyCorpus);
        }
        let mut terms: Vec<String> = Vec::new();
        let mut lookup: HashMap<String, usize> = HashMap::new();
        let mut df: Vec<usize> = Vec::new();
        for tokens in token_docs {
            let mut doc_term_ids: Vec<usize> = tokens
                .iter()
                .map(|t| {
                    *lookup.entry(t.clone()).or_insert_with(|| {
                        terms.push(t.clone());
                        df.push(0);
                        terms.len() - 1
                    })
                })
                .collect();
            doc_term_ids.sort_unstable();
            doc_term_ids.dedup();
            for id in doc_term_ids {
                df[id] += 1;
            }
        }
        if terms.is_empty() {
            return Err(FeatureError::EmptyVocabulary);
        }
        let n = token_docs.len() as f64;
        let idf = df
            .iter()
            .map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
            .collect();
        Ok(TfidfModel { terms, idf, lookup })
    }

    pub fn vocab_size(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.lookup.get(term).copied()
    }

    pub fn contains_term(&self, term: &str) -> bool {
        self.lookup.contains_key(term)
    }

    /// Raw counts times idf, L2-normalized. Out-of-vocabulary tokens are
    /// ignored; a span with no known tokens becomes the zero vector.
    pub fn transform(&self, tokens: &[String]) -> SparseVector {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for token in tokens {
            if let Some(&idx) = self.lookup.get(token) {
                *counts.entry(idx).or_insert(0) += 1;
            }
        }
        if counts.is_empty() {
            return SparseVector::zero(self.terms.len());
        }
        let mut entries: Vec<(usize, f64)> = counts
            .into_iter()
            .map(|(idx, count)| (idx, count as f64 * self.idf[idx]))
            .collect();
        let norm = entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt();
        for (_, w) in &mut entries {
            *w /= norm;
        }
        SparseVector { dim: self.terms.len(), entries }
    }
}
