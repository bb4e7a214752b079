//! Pain-mention detection pipeline for clinical-style text.
//!
//! The crate covers the full workflow from raw notes to evaluated
//! classifiers:
//!
//! 1. [`corpus`] — line-delimited corpus ingestion and validation.
//! 2. [`lexicon`] — compiled multi-pattern matching of pain terms.
//! 3. [`spans`] — candidate-span extraction (a character window around
//!    each lexicon hit; the unit that gets annotated and classified).
//! 4. [`annotation`] — multi-annotator labels, percent agreement and
//!    Cohen's kappa, the agreement gate, majority adjudication into a
//!    binary gold standard.
//! 5. [`features`] — deterministic preprocessing and TF-IDF featurization
//!    into L2-normalized sparse vectors.
//! 6. [`classifiers`] — linear SVM (stochastic subgradient), KNN,
//!    majority baseline, and a dense-embedding SVM head.
//! 7. [`pipeline`] — end-to-end model artifacts (preprocessing + features
//!    + classifier) with versioned binary persistence.
//! 8. [`evaluation`] — stratified splits, k-fold cross-validation with
//!    95% confidence intervals, error reports.
//! 9. [`synth`] — seeded synthetic corpora with known gold labels and
//!    simulated annotators, so the whole pipeline is testable without
//!    access-restricted clinical data.
//!
//! Everything is deterministic given explicit seeds: same inputs and
//! seeds produce byte-identical artifacts.

pub mod annotation;
pub mod classifiers;
pub mod corpus;
pub mod evaluation;
pub mod features;
mod hashing;
pub mod jsonl;
pub mod lexicon;
pub mod pipeline;
pub mod spans;
pub mod synth;

pub use annotation::{AgreementReport, AnnotationLabel, AnnotationRecord, GoldSpan, GoldStatus};
pub use classifiers::{DenseVector, KnnModel, LinearSvmModel, MajorityModel, Prediction};
pub use corpus::Document;
pub use evaluation::{Metrics, MetricsWithCi, SplitSpec};
pub use features::{PreprocessConfig, SparseVector, TfidfModel};
pub use lexicon::{Lexicon, LexiconTerm, Match, MatchMode};
pub use pipeline::{ModelArtifact, ModelSpec};
pub use spans::CandidateSpan;
pub use synth::SynthConfig;
