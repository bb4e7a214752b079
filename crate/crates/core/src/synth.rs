//! Seeded synthetic corpora with known gold labels.
//!
//! Real clinical notes are access-restricted, so end-to-end behavior is
//! exercised on generated documents instead: each document carries one
//! or more planted sentences built from a template and a lexicon term,
//! padded with neutral filler so that consecutive plants are farther
//! apart than the extraction window. That spacing guarantees a bijection
//! between plants and extracted spans, which is what lets the generator
//! emit exact gold labels. Simulated annotators then relabel every span
//! with a configurable flip probability, giving agreement statistics
//! with known expected values (see [`expected_pairwise_kappa`]).
//!
//! All randomness comes from one seeded stream with a fixed draw order,
//! so a config reproduces its corpus byte for byte.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::annotation::{binarize, AnnotationLabel, AnnotationRecord, GoldSpan, GoldStatus};
use crate::corpus::Document;
use crate::lexicon::{Lexicon, MatchMode};
use crate::spans::{extract_spans, CandidateSpan, SpanError, DEFAULT_WINDOW};

pub const ANNOTATORS: [&str; 3] = ["ann1", "ann2", "ann3"];
/// Annotation rounds cover this many consecutive spans.
pub const SPANS_PER_ROUND: usize = 200;

const SOURCE_TYPES: [&str; 4] =
    ["progress_note", "nursing_note", "discharge_summary", "triage_note"];

/// Templates with one `{term}` hole each. The sets deliberately include
/// hard cases: affirmed mentions wrapped in negation-like phrasing,
/// typo-fused prefixes, and run-together scanner noise.
const RELEVANT_TEMPLATES: [&str; 8] = [
    "reports severe {term} in the lower back since yesterday.",
    "the {term} woke her from sleep twice overnight.",
    "ongoing {term} rated seven out of ten at rest.",
    "causing him {term} when climbing stairs.",
    "denying symptoms other than {term} at this visit.",
    "advised to return if the {term} increases over the weekend.",
    "dabdominal {term} recorded in the notes after transfer.",
    "achespainodd sensations noted, {term} worst at night.",
];

const NOT_RELEVANT_TEMPLATES: [&str; 7] = [
    "she feared the {term} would return after discharge.",
    "father's hip {term} was discussed at length.",
    "wishing to project his {term} on others, per psych note.",
    "?{term} noted by triage, unconfirmed on examination.",
    "worried that {term} might develop if untreated.",
    "education provided on what {term} would feel like.",
    "risk of potential pressure sores and {term} reviewed.",
];

const NEGATED_TEMPLATES: [&str; 6] = [
    "denies any {term} today.",
    "no {term} reported on review of systems.",
    "without {term} or stiffness on movement.",
    "patient denies {term} at rest or with exertion.",
    "no evidence of {term} on palpation.",
    "negative for {term} and swelling.",
];

/// Neutral padding. Contains no lexicon term in either match mode, and
/// none of the words of a multi-word term, so sentence joins cannot
/// fabricate one.
const FILLER_SENTENCES: [&str; 10] = [
    "vital signs stable and reviewed with the team.",
    "medication list reconciled during the visit.",
    "follow up scheduled with the primary clinic.",
    "diet and activity discussed at the bedside.",
    "labs drawn this morning and pending review.",
    "family present and updated on the plan.",
    "sleep pattern unchanged from prior visits.",
    "mobility exercises continued as tolerated.",
    "wound site clean and dressing changed.",
    "hydration encouraged with meals throughout the day.",
];

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Span(#[from] SpanError),
}

/// Generator parameters. [`SynthConfig::new`] fills in the defaults:
/// patients at roughly 0.36 per document, 8 spans per patient, label mix
/// 72/15/13, annotator flip probability 0.05.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub n_docs: usize,
    pub n_patients: usize,
    pub spans_per_patient_mean: f64,
    /// Probabilities of relevant, not_relevant, negated.
    pub label_mix: [f64; 3],
    /// Probability that an annotator flips a span to a uniformly chosen
    /// wrong label.
    pub annotator_noise: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(n_docs: usize, seed: u64) -> Self {
        SynthConfig {
            n_docs,
            n_patients: ((n_docs as f64 * 0.36).round() as usize).max(1),
            spans_per_patient_mean: 8.0,
            label_mix: [0.72, 0.15, 0.13],
            annotator_noise: 0.05,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_docs == 0 {
            return Err(SynthError::BadConfig("n_docs must be at least 1".into()));
        }
        if self.n_patients == 0 {
            return Err(SynthError::BadConfig("n_patients must be at least 1".into()));
        }
        if !self.spans_per_patient_mean.is_finite() || self.spans_per_patient_mean <= 0.0 {
            return Err(SynthError::BadConfig(format!(
                "spans_per_patient_mean must be positive, got {}",
                self.spans_per_patient_mean
            )));
        }
        if self.label_mix.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(SynthError::BadConfig(format!(
                "label mix must be nonnegative, got {:?}",
                self.label_mix
            )));
        }
        let sum: f64 = self.label_mix.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SynthError::BadConfig(format!(
                "label mix must sum to 1, got {:?} (sum {sum})",
                self.label_mix
            )));
        }
        if !(0.0..=1.0).contains(&self.annotator_noise) {
            return Err(SynthError::BadConfig(format!(
                "annotator_noise must be in [0, 1], got {}",
                self.annotator_noise
            )));
        }
        Ok(())
    }

    /// Total spans across the corpus: the per-patient mean times the
    /// patient count, but at least one span per document.
    pub fn total_spans(&self) -> usize {
        let target = (self.spans_per_patient_mean * self.n_patients as f64).round() as usize;
        target.max(self.n_docs)
    }
}

/// Everything the generator produces for one config.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub documents: Vec<Document>,
    pub spans: Vec<CandidateSpan>,
    pub gold: Vec<GoldSpan>,
    pub annotations: Vec<AnnotationRecord>,
}

fn draw_label(rng: &mut ChaCha12Rng, mix: &[f64; 3]) -> AnnotationLabel {
    let u: f64 = rng.random();
    if u < mix[0] {
        AnnotationLabel::Relevant
    } else if u < mix[0] + mix[1] {
        AnnotationLabel::NotRelevant
    } else {
        AnnotationLabel::Negated
    }
}

fn templates_for(label: AnnotationLabel) -> &'static [&'static str] {
    match label {
        AnnotationLabel::Relevant => &RELEVANT_TEMPLATES,
        AnnotationLabel::NotRelevant => &NOT_RELEVANT_TEMPLATES,
        AnnotationLabel::Negated => &NEGATED_TEMPLATES,
    }
}

fn wrong_labels(truth: AnnotationLabel) -> [AnnotationLabel; 2] {
    use AnnotationLabel::{Negated, NotRelevant, Relevant};
    match truth {
        Relevant => [NotRelevant, Negated],
        NotRelevant => [Relevant, Negated],
        Negated => [Relevant, NotRelevant],
    }
}

/// Document text under construction, tracked in characters so planted
/// term offsets are exact.
struct DocBuilder {
    text: String,
    char_len: usize,
}

impl DocBuilder {
    fn new() -> Self {
        DocBuilder { text: String::new(), char_len: 0 }
    }

    /// Returns the char offset at which the sentence begins.
    fn push_sentence(&mut self, sentence: &str) -> usize {
        if !self.text.is_empty() {
            self.text.push(' ');
            self.char_len += 1;
        }
        let start = self.char_len;
        self.text.push_str(sentence);
        self.char_len += sentence.chars().count();
        start
    }
}

/// Generates documents, their candidate spans, exact gold labels, and
/// noisy three-annotator labels. The spans are produced by the real
/// matcher and extractor running on the generated text, not transcribed
/// from the plants, so the whole read path is exercised.
pub fn generate(config: &SynthConfig) -> Result<SynthOutput, SynthError> {
    config.validate()?;
    let lexicon = Lexicon::builtin();
    let matcher = lexicon.compile().expect("builtin lexicon compiles");
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);

    let total = config.total_spans();
    let base = total / config.n_docs;
    let extra = total % config.n_docs;

    let mut documents = Vec::with_capacity(config.n_docs);
    let mut spans: Vec<CandidateSpan> = Vec::with_capacity(total);
    let mut gold = Vec::with_capacity(total);
    let mut truths: Vec<AnnotationLabel> = Vec::with_capacity(total);

    for d in 0..config.n_docs {
        let plant_count = base + usize::from(d < extra);
        let patient = rng.random_range(0..config.n_patients);
        let source = SOURCE_TYPES[rng.random_range(0..SOURCE_TYPES.len())];
        let mut builder = DocBuilder::new();

        let lead = rng.random_range(0..=2usize);
        for _ in 0..lead {
            builder.push_sentence(FILLER_SENTENCES[rng.random_range(0..FILLER_SENTENCES.len())]);
        }

        let mut plants: Vec<(usize, usize, AnnotationLabel)> = Vec::with_capacity(plant_count);
        for p in 0..plant_count {
            let label = draw_label(&mut rng, &config.label_mix);
            let set = templates_for(label);
            let template = set[rng.random_range(0..set.len())];
            let term = &lexicon.terms()[rng.random_range(0..lexicon.terms().len())].surface;
            let (prefix, suffix) =
                template.split_once("{term}").expect("every template has one term hole");
            let sentence = format!("{prefix}{term}{suffix}");
            let sentence_start = builder.push_sentence(&sentence);
            let term_start = sentence_start + prefix.chars().count();
            let term_end = term_start + term.chars().count();
            plants.push((term_start, term_end, label));

            if p + 1 < plant_count {
                // Keep consecutive plants farther apart than the window,
                // so their windows start at distinct offsets and the
                // extractor returns exactly one span per plant.
                while builder.char_len - term_end <= DEFAULT_WINDOW + 20 {
                    builder.push_sentence(
                        FILLER_SENTENCES[rng.random_range(0..FILLER_SENTENCES.len())],
                    );
                }
            }
        }

        let trail = rng.random_range(0..=2usize);
        for _ in 0..trail {
            builder.push_sentence(FILLER_SENTENCES[rng.random_range(0..FILLER_SENTENCES.len())]);
        }

        let mut doc = Document::new(format!("D{d:05}"), builder.text);
        doc.patient_id = Some(format!("P{patient:04}"));
        doc.source_type = Some(source.to_string());

        let matches = matcher.find_matches(&doc.text, MatchMode::WordBoundary);
        let doc_spans = extract_spans(&doc, &matches, DEFAULT_WINDOW)?;
        debug_assert_eq!(doc_spans.len(), plants.len(), "one span per plant in {}", doc.doc_id);
        for (span, &(term_start, term_end, label)) in doc_spans.iter().zip(&plants) {
            debug_assert_eq!((span.term_start, span.term_end), (term_start, term_end));
            gold.push(GoldSpan {
                span_id: span.span_id.clone(),
                label3: Some(label),
                label2: Some(binarize(label)),
                status: GoldStatus::Unanimous,
            });
            truths.push(label);
        }
        spans.extend(doc_spans);
        documents.push(doc);
    }

    let mut annotations = Vec::with_capacity(truths.len() * ANNOTATORS.len());
    for (s, &truth) in truths.iter().enumerate() {
        let round = (s / SPANS_PER_ROUND) as u32 + 1;
        for annotator in ANNOTATORS {
            let flip: f64 = rng.random();
            let label = if flip < config.annotator_noise {
                wrong_labels(truth)[rng.random_range(0..2)]
            } else {
                truth
            };
            annotations.push(AnnotationRecord {
                span_id: spans[s].span_id.clone(),
                annotator_id: annotator.to_string(),
                label,
                round: Some(round),
            });
        }
    }

    Ok(SynthOutput { documents, spans, gold, annotations })
}

/// Chance that two independent annotators agree on a span when each
/// flips with the given probability: both keep the truth, or both flip
/// and land on the same wrong label (probability 1/2 given two flips).
pub fn expected_pairwise_agreement(noise: f64) -> f64 {
    (1.0 - noise) * (1.0 - noise) + noise * noise / 2.0
}

/// Expected Cohen's kappa between two simulated annotators. Each label's
/// marginal is the chance of keeping it plus the chance of flipping onto
/// it from either other label.
pub fn expected_pairwise_kappa(mix: &[f64; 3], noise: f64) -> f64 {
    let p_o = expected_pairwise_agreement(noise);
    let p_e: f64 = mix
        .iter()
        .map(|&pi| {
            let marginal = pi * (1.0 - noise) + (1.0 - pi) * noise / 2.0;
            marginal * marginal
        })
        .sum();
    (p_o - p_e) / (1.0 - p_e)
}
