//! Annotator labels, inter-annotator agreement, adjudication into a gold
//! standard, and label binarization.

use std::collections::BTreeMap;
use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::{self, JsonlError};

/// Default agreement gate; passing requires kappa strictly above it.
pub const DEFAULT_AGREEMENT_GATE: f64 = 0.80;

/// The three-way annotation schema: the patient's physical pain, a mention
/// that is not about the patient's pain (other people, hypothetical,
/// metaphorical), or an explicit statement that pain is absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationLabel {
    Relevant,
    NotRelevant,
    Negated,
}

impl AnnotationLabel {
    pub const ALL: [AnnotationLabel; 3] = [
        AnnotationLabel::Relevant,
        AnnotationLabel::NotRelevant,
        AnnotationLabel::Negated,
    ];
}

/// One annotator's label for one span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub span_id: String,
    pub annotator_id: String,
    pub label: AnnotationLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoldStatus {
    Adjudicated,
    Unanimous,
    Unresolved,
}

/// The adjudicated label for one span. Unresolved spans carry neither
/// `label3` nor `label2`; resolved spans carry both, with
/// `label2 == 1` exactly when `label3` is Relevant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldSpan {
    pub span_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label3: Option<AnnotationLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label2: Option<u8>,
    pub status: GoldStatus,
}

impl GoldSpan {
    pub fn resolved(span_id: impl Into<String>, label3: AnnotationLabel, status: GoldStatus) -> Self {
        debug_assert!(status != GoldStatus::Unresolved);
        GoldSpan {
            span_id: span_id.into(),
            label3: Some(label3),
            label2: Some(binarize(label3)),
            status,
        }
    }

    pub fn unresolved(span_id: impl Into<String>) -> Self {
        GoldSpan {
            span_id: span_id.into(),
            label3: None,
            label2: None,
            status: GoldStatus::Unresolved,
        }
    }

    pub fn is_resolved(&self) -> bool {
        self.status != GoldStatus::Unresolved
    }
}

/// Relevant maps to 1; NotRelevant and Negated combine to 0.
pub fn binarize(label: AnnotationLabel) -> u8 {
    match label {
        AnnotationLabel::Relevant => 1,
        AnnotationLabel::NotRelevant | AnnotationLabel::Negated => 0,
    }
}

#[derive(Debug, Error)]
pub enum AgreementError {
    #[error("label lists are empty")]
    Empty,
    #[error("label lists differ in length: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error(
        "kappa is undefined: expected agreement is 1 but observed agreement is {observed}"
    )]
    Degenerate { observed: f64 },
    #[error("need at least two annotators, found {0}")]
    TooFewAnnotators(usize),
    #[error("spans missing labels from at least one annotator: {}", ids.join(", "))]
    IncompleteSpans { ids: Vec<String> },
    #[error("duplicate record for span {span_id} by annotator {annotator_id}")]
    DuplicateRecord { span_id: String, annotator_id: String },
}

/// Fraction of aligned positions where both lists carry the same label.
pub fn percent_agreement<T: PartialEq>(a: &[T], b: &[T]) -> Result<f64, AgreementError> {
    if a.len() != b.len() {
        return Err(AgreementError::LengthMismatch { a: a.len(), b: b.len() });
    }
    if a.is_empty() {
        return Err(AgreementError::Empty);
    }
    let same = a.iter().zip(b).filter(|(x, y)| x == y).count();
    Ok(same as f64 / a.len() as f64)
}

/// Cohen's kappa: (p_o - p_e) / (1 - p_e), with p_e the product-marginal
/// chance agreement. When p_e is 1 (both annotators constant on the same
/// label), returns 1 for perfect agreement and an explicit error otherwise,
/// so degenerate inputs never become NaN in reports.
pub fn cohens_kappa<T: Ord + Clone>(a: &[T], b: &[T]) -> Result<f64, AgreementError> {
    let p_o = percent_agreement(a, b)?;
    let n = a.len() as f64;

    let mut count_a: BTreeMap<&T, usize> = BTreeMap::new();
    let mut count_b: BTreeMap<&T, usize> = BTreeMap::new();
    for x in a {
        *count_a.entry(x).or_insert(0) += 1;
    }
    for y in b {
        *count_b.entry(y).or_insert(0) += 1;
    }
    // Iterating the ordered map keeps the float summation order fixed.
    let mut p_e = 0.0;
    for (label, ca) in &count_a {
        if let Some(cb) = count_b.get(*label) {
            p_e += (*ca as f64 / n) * (*cb as f64 / n);
        }
    }

    if p_e >= 1.0 {
        if p_o >= 1.0 {
            return Ok(1.0);
        }
        return Err(AgreementError::Degenerate { observed: p_o });
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Agreement for one pair of annotators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAgreement {
    pub percent_agreement: f64,
    pub kappa: f64,
}

/// Agreement over a set of fully cross-annotated spans. Report-level
/// figures are unweighted means of the pairwise figures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub n_items: usize,
    pub percent_agreement: f64,
    pub kappa: f64,
    pub per_pair: BTreeMap<String, PairAgreement>,
}

/// Computes pairwise agreement over records in which every span must carry
/// a label from every annotator present.
pub fn round_agreement(records: &[AnnotationRecord]) -> Result<AgreementReport, AgreementError> {
    let mut annotators: Vec<&str> = Vec::new();
    let mut by_span: BTreeMap<&str, BTreeMap<&str, AnnotationLabel>> = BTreeMap::new();
    for r in records {
        if !annotators.contains(&r.annotator_id.as_str()) {
            annotators.push(&r.annotator_id);
        }
        let labels = by_span.entry(&r.span_id).or_default();
        if labels.insert(&r.annotator_id, r.label).is_some() {
            return Err(AgreementError::DuplicateRecord {
                span_id: r.span_id.clone(),
                annotator_id: r.annotator_id.clone(),
            });
        }
    }
    annotators.sort_unstable();
    if annotators.len() < 2 {
        return Err(AgreementError::TooFewAnnotators(annotators.len()));
    }
    if by_span.is_empty() {
        return Err(AgreementError::Empty);
    }

    let incomplete: Vec<String> = by_span
        .iter()
        .filter(|(_, labels)| labels.len() != annotators.len())
        .map(|(span_id, _)| span_id.to_string())
        .collect();
    if !incomplete.is_empty() {
        return Err(AgreementError::IncompleteSpans { ids: incomplete });
    }

    // Aligned label vector per annotator, spans in sorted-id order.
    let columns: Vec<Vec<AnnotationLabel>> = annotators
        .iter()
        .map(|ann| by_span.values().map(|labels| labels[ann]).collect())
        .collect();

    let mut per_pair = BTreeMap::new();
    let mut percent_sum = 0.0;
    let mut kappa_sum = 0.0;
    for i in 0..annotators.len() {
        for j in (i + 1)..annotators.len() {
            let percent = percent_agreement(&columns[i], &columns[j])?;
            let kappa = cohens_kappa(&columns[i], &columns[j])?;
            percent_sum += percent;
            kappa_sum += kappa;
            per_pair.insert(
                format!("{}|{}", annotators[i], annotators[j]),
                PairAgreement { percent_agreement: percent, kappa },
            );
        }
    }
    let pairs = per_pair.len() as f64;
    Ok(AgreementReport {
        n_items: by_span.len(),
        percent_agreement: percent_sum / pairs,
        kappa: kappa_sum / pairs,
        per_pair,
    })
}

/// Outcome of the agreement gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GateOutcome {
    pub pass: bool,
    pub threshold: f64,
    pub margin: f64,
}

/// Strict gate: passes only when kappa exceeds the threshold.
pub fn gate_check(report: &AgreementReport, threshold: f64) -> GateOutcome {
    GateOutcome {
        pass: report.kappa > threshold,
        threshold,
        margin: report.kappa - threshold,
    }
}

#[derive(Debug, Error)]
pub enum AdjudicateError {
    #[error("no annotation records")]
    Empty,
    #[error("duplicate record for span {span_id} by annotator {annotator_id}")]
    DuplicateRecord { span_id: String, annotator_id: String },
}

/// Majority adjudication over the raw 3-way labels.
///
/// Three identical labels are Unanimous; a 2-vote majority is Adjudicated;
/// anything else (full disagreement, or fewer than two records) is
/// Unresolved unless `resolutions` supplies a label, which then counts as
/// Adjudicated. Resolution entries for spans that did not need one are
/// ignored and reported back as warnings.
pub fn adjudicate(
    records: &[AnnotationRecord],
    resolutions: &BTreeMap<String, AnnotationLabel>,
) -> Result<(Vec<GoldSpan>, Vec<String>), AdjudicateError> {
    if records.is_empty() {
        return Err(AdjudicateError::Empty);
    }
    let mut by_span: BTreeMap<&str, Vec<(&str, AnnotationLabel)>> = BTreeMap::new();
    for r in records {
        let entries = by_span.entry(&r.span_id).or_default();
        if entries.iter().any(|(ann, _)| *ann == r.annotator_id) {
            return Err(AdjudicateError::DuplicateRecord {
                span_id: r.span_id.clone(),
                annotator_id: r.annotator_id.clone(),
            });
        }
        entries.push((&r.annotator_id, r.label));
    }

    let mut gold = Vec::with_capacity(by_span.len());
    let mut warnings = Vec::new();
    for (span_id, entries) in &by_span {
        let labels: Vec<AnnotationLabel> = entries.iter().map(|(_, l)| l).copied().collect();
        let outcome = majority_outcome(&labels);
        let resolution = resolutions.get(*span_id);
        match (outcome, resolution) {
            (Some((label, status)), None) => gold.push(GoldSpan::resolved(*span_id, label, status)),
            (Some((label, status)), Some(res)) => {
                warnings.push(format!(
                    "resolution for span {span_id} ignored: span is already {} as {:?}",
                    status_name(status),
                    res
                ));
                gold.push(GoldSpan::resolved(*span_id, label, status));
            }
            (None, Some(res)) => gold.push(GoldSpan::resolved(*span_id, *res, GoldStatus::Adjudicated)),
            (None, None) => gold.push(GoldSpan::unresolved(*span_id)),
        }
    }
    for span_id in resolutions.keys() {
        if !by_span.contains_key(span_id.as_str()) {
            warnings.push(format!("resolution for unknown span {span_id} ignored"));
        }
    }
    Ok((gold, warnings))
}

fn status_name(status: GoldStatus) -> &'static str {
    match status {
        GoldStatus::Adjudicated => "adjudicated",
        GoldStatus::Unanimous => "unanimous",
        GoldStatus::Unresolved => "unresolved",
    }
}

/// Majority of the 3-way labels: `Some((label, status))` when decided.
fn majority_outcome(labels: &[AnnotationLabel]) -> Option<(AnnotationLabel, GoldStatus)> {
    if labels.len() < 2 {
        return None;
    }
    for candidate in AnnotationLabel::ALL {
        let votes = labels.iter().filter(|&&l| l == candidate).count();
        if votes == labels.len() && votes >= 3 {
            return Some((candidate, GoldStatus::Unanimous));
        }
        if votes >= 2 {
            return Some((candidate, GoldStatus::Adjudicated));
        }
    }
    None
}

/// Three-way and binary label fractions over a fully resolved gold set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelDistribution {
    pub n: usize,
    pub relevant: f64,
    pub not_relevant: f64,
    pub negated: f64,
    pub positive: f64,
    pub negative: f64,
}

#[derive(Debug, Error)]
pub enum DistributionError {
    #[error("no gold spans")]
    Empty,
    #[error("{0} unresolved spans present; resolve or drop them first")]
    Unresolved(usize),
}

pub fn label_distribution(gold: &[GoldSpan]) -> Result<LabelDistribution, DistributionError> {
    if gold.is_empty() {
        return Err(DistributionError::Empty);
    }
    let unresolved = gold.iter().filter(|g| !g.is_resolved()).count();
    if unresolved > 0 {
        return Err(DistributionError::Unresolved(unresolved));
    }
    let n = gold.len() as f64;
    let count = |l: AnnotationLabel| gold.iter().filter(|g| g.label3 == Some(l)).count() as f64;
    let relevant = count(AnnotationLabel::Relevant) / n;
    let not_relevant = count(AnnotationLabel::NotRelevant) / n;
    let negated = count(AnnotationLabel::Negated) / n;
    let positive = gold.iter().filter(|g| g.label2 == Some(1)).count() as f64 / n;
    Ok(LabelDistribution {
        n: gold.len(),
        relevant,
        not_relevant,
        negated,
        positive,
        negative: 1.0 - positive,
    })
}

#[derive(Debug, Error)]
pub enum GoldFileError {
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("{path} line {line}: duplicate span_id {span_id:?}")]
    DuplicateSpanId {
        path: String,
        line: usize,
        span_id: String,
    },
    #[error("{path} line {line}: inconsistent gold record for span {span_id:?}")]
    Inconsistent {
        path: String,
        line: usize,
        span_id: String,
    },
}

/// Loads a gold file, checking the label3/label2/status consistency rules.
pub fn load_gold(path: &Path) -> Result<Vec<GoldSpan>, GoldFileError> {
    let rows: Vec<(usize, GoldSpan)> = jsonl::read_numbered(path)?;
    let mut seen = HashSet::with_capacity(rows.len());
    let mut gold = Vec::with_capacity(rows.len());
    for (line, g) in rows {
        let consistent = match g.status {
            GoldStatus::Unresolved => g.label3.is_none() && g.label2.is_none(),
            _ => match (g.label3, g.label2) {
                (Some(l3), Some(l2)) => l2 == binarize(l3),
                _ => false,
            },
        };
        if !consistent {
            return Err(GoldFileError::Inconsistent {
                path: path.display().to_string(),
                line,
                span_id: g.span_id,
            });
        }
        if !seen.insert(g.span_id.clone()) {
            return Err(GoldFileError::DuplicateSpanId {
                path: path.display().to_string(),
                line,
                span_id: g.span_id,
            });
        }
        gold.push(g);
    }
    Ok(gold)
}

pub fn save_gold(path: &Path, gold: &[GoldSpan]) -> Result<(), JsonlError> {
    jsonl::write_records(path, gold)
}

pub fn load_annotations(path: &Path) -> Result<Vec<AnnotationRecord>, JsonlError> {
    jsonl::read_records(path)
}

pub fn save_annotations(path: &Path, records: &[AnnotationRecord]) -> Result<(), JsonlError> {
    jsonl::write_records(path, records)
}

#[cfg(test)]
mod tests {
    use super::AnnotationLabel::{Negated, NotRelevant, Relevant};
    use super::*;

    fn rec(span: &str, ann: &str, label: AnnotationLabel) -> AnnotationRecord {
        AnnotationRecord {
            span_id: span.into(),
            annotator_id: ann.into(),
            label,
            round: None,
        }
    }

    #[test]
    fn percent_agreement_counts_matching_positions() {
        let a = [Relevant, NotRelevant, Relevant];
        let b = [Relevant, Relevant, Relevant];
        assert!((percent_agreement(&a, &b).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(percent_agreement(&a, &a).unwrap(), 1.0);
        let c = [NotRelevant, Negated, NotRelevant];
        assert_eq!(percent_agreement(&a, &c).unwrap(), 0.0);
    }

    #[test]
    fn kappa_matches_the_hand_computed_example() {
        let a = [1u8, 1, 0, 0];
        let b = [1u8, 0, 0, 0];
        // p_o = 0.75, p_e = 0.5.
        assert!((cohens_kappa(&a, &b).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kappa_is_one_for_identical_lists_with_two_labels() {
        let a = [Relevant, Negated, Relevant];
        assert_eq!(cohens_kappa(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_kappa_follows_the_stated_convention() {
        // Both constant on the same label: p_e = 1 and p_o = 1, kappa 1.
        assert_eq!(cohens_kappa(&[1u8, 1], &[1u8, 1]).unwrap(), 1.0);
        // Constant on different labels: p_e = 0, ordinary kappa of 0.
        assert_eq!(cohens_kappa(&[1u8, 1], &[0u8, 0]).unwrap(), 0.0);
        // One constant side with the other mixed is not degenerate.
        assert!(cohens_kappa(&[1u8, 1, 1], &[1u8, 1, 0]).is_ok());
    }

    #[test]
    fn errors_on_empty_and_mismatched_lists() {
        assert!(matches!(
            percent_agreement::<u8>(&[], &[]),
            Err(AgreementError::Empty)
        ));
        assert!(matches!(
            cohens_kappa(&[1u8], &[1u8, 0]),
            Err(AgreementError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn round_agreement_is_perfect_for_identical_annotators() {
        let mut records = Vec::new();
        for span in ["s1", "s2", "s3"] {
            for ann in ["a", "b", "c"] {
                records.push(rec(span, ann, if span == "s2" { Negated } else { Relevant }));
            }
        }
        let report = round_agreement(&records).unwrap();
        assert_eq!(report.n_items, 3);
        assert_eq!(report.percent_agreement, 1.0);
        assert_eq!(report.kappa, 1.0);
        assert_eq!(report.per_pair.len(), 3);
    }

    #[test]
    fn round_agreement_averages_the_three_pairs() {
        // a and b identical; c disagrees everywhere, on 2-label data.
        let mut records = Vec::new();
        let truth = [Relevant, Negated, Relevant, Negated];
        for (i, span) in ["s1", "s2", "s3", "s4"].iter().enumerate() {
            records.push(rec(span, "a", truth[i]));
            records.push(rec(span, "b", truth[i]));
            let flipped = if truth[i] == Relevant { Negated } else { Relevant };
            records.push(rec(span, "c", flipped));
        }
        let report = round_agreement(&records).unwrap();
        assert!((report.percent_agreement - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn round_agreement_lists_incomplete_spans() {
        let records = vec![
            rec("s1", "a", Relevant),
            rec("s1", "b", Relevant),
            rec("s1", "c", Relevant),
            rec("s2", "a", Relevant),
            rec("s2", "b", Relevant),
        ];
        let err = round_agreement(&records).unwrap_err();
        assert!(matches!(err, AgreementError::IncompleteSpans { ref ids } if ids == &["s2"]));
    }

    #[test]
    fn gate_is_strict() {
        let mut report = AgreementReport {
            n_items: 10,
            percent_agreement: 0.9,
            kappa: 0.88,
            per_pair: BTreeMap::new(),
        };
        let outcome = gate_check(&report, DEFAULT_AGREEMENT_GATE);
        assert!(outcome.pass);
        assert!((outcome.margin - 0.08).abs() < 1e-12);

        report.kappa = 0.80;
        assert!(!gate_check(&report, DEFAULT_AGREEMENT_GATE).pass);
        report.kappa = 0.79;
        assert!(!gate_check(&report, DEFAULT_AGREEMENT_GATE).pass);
    }

    #[test]
    fn adjudication_follows_the_majority_rules() {
        let records = vec![
            rec("s1", "a", Relevant),
            rec("s1", "b", Relevant),
            rec("s1", "c", Negated),
            rec("s2", "a", Relevant),
            rec("s2", "b", NotRelevant),
            rec("s2", "c", Negated),
            rec("s3", "a", Negated),
            rec("s3", "b", Negated),
            rec("s3", "c", Negated),
        ];
        let (gold, warnings) = adjudicate(&records, &BTreeMap::new()).unwrap();
        assert!(warnings.is_empty());
        let by_id: BTreeMap<&str, &GoldSpan> =
            gold.iter().map(|g| (g.span_id.as_str(), g)).collect();
        assert_eq!(by_id["s1"].status, GoldStatus::Adjudicated);
        assert_eq!(by_id["s1"].label3, Some(Relevant));
        assert_eq!(by_id["s1"].label2, Some(1));
        assert_eq!(by_id["s2"].status, GoldStatus::Unresolved);
        assert_eq!(by_id["s2"].label3, None);
        assert_eq!(by_id["s3"].status, GoldStatus::Unanimous);
        assert_eq!(by_id["s3"].label2, Some(0));
    }

    #[test]
    fn resolutions_fill_unresolved_spans_and_warn_otherwise() {
        let records = vec![
            rec("s1", "a", Relevant),
            rec("s1", "b", NotRelevant),
            rec("s1", "c", Negated),
            rec("s2", "a", Relevant),
            rec("s2", "b", Relevant),
            rec("s2", "c", Relevant),
        ];
        let mut resolutions = BTreeMap::new();
        resolutions.insert("s1".to_string(), NotRelevant);
        resolutions.insert("s2".to_string(), Negated);
        resolutions.insert("s9".to_string(), Relevant);
        let (gold, warnings) = adjudicate(&records, &resolutions).unwrap();
        let by_id: BTreeMap<&str, &GoldSpan> =
            gold.iter().map(|g| (g.span_id.as_str(), g)).collect();
        assert_eq!(by_id["s1"].status, GoldStatus::Adjudicated);
        assert_eq!(by_id["s1"].label3, Some(NotRelevant));
        assert_eq!(by_id["s2"].status, GoldStatus::Unanimous);
        assert_eq!(by_id["s2"].label3, Some(Relevant));
        assert_eq!(warnings.len(), 2);
    }

    #[test]
    fn single_record_spans_are_unresolved_and_two_agreeing_are_adjudicated() {
        let records = vec![
            rec("s1", "a", Relevant),
            rec("s2", "a", Negated),
            rec("s2", "b", Negated),
        ];
        let (gold, _) = adjudicate(&records, &BTreeMap::new()).unwrap();
        let by_id: BTreeMap<&str, &GoldSpan> =
            gold.iter().map(|g| (g.span_id.as_str(), g)).collect();
        assert_eq!(by_id["s1"].status, GoldStatus::Unresolved);
        assert_eq!(by_id["s2"].status, GoldStatus::Adjudicated);
    }

    #[test]
    fn binarize_combines_the_negative_classes() {
        assert_eq!(binarize(Relevant), 1);
        assert_eq!(binarize(NotRelevant), 0);
        assert_eq!(binarize(Negated), 0);
    }

    #[test]
    fn label_distribution_matches_counts_and_sums_to_one() {
        let mut gold = Vec::new();
        for i in 0..72 {
            gold.push(GoldSpan::resolved(format!("r{i}"), Relevant, GoldStatus::Unanimous));
        }
        for i in 0..15 {
            gold.push(GoldSpan::resolved(format!("n{i}"), NotRelevant, GoldStatus::Unanimous));
        }
        for i in 0..13 {
            gold.push(GoldSpan::resolved(format!("g{i}"), Negated, GoldStatus::Unanimous));
        }
        let dist = label_distribution(&gold).unwrap();
        assert!((dist.relevant - 0.72).abs() < 1e-12);
        assert!((dist.not_relevant - 0.15).abs() < 1e-12);
        assert!((dist.negated - 0.13).abs() < 1e-12);
        assert!((dist.positive - 0.72).abs() < 1e-12);
        assert!(((dist.relevant + dist.not_relevant + dist.negated) - 1.0).abs() < 1e-12);

        assert!(matches!(label_distribution(&[]), Err(DistributionError::Empty)));
        let with_unresolved = vec![GoldSpan::unresolved("u1")];
        assert!(matches!(
            label_distribution(&with_unresolved),
            Err(DistributionError::Unresolved(1))
        ));
    }

    #[test]
    fn gold_file_round_trips_and_rejects_inconsistency() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gold.jsonl");
        let gold = vec![
            GoldSpan::resolved("s1", Relevant, GoldStatus::Adjudicated),
            GoldSpan::unresolved("s2"),
        ];
        save_gold(&path, &gold).unwrap();
        assert_eq!(load_gold(&path).unwrap(), gold);

        std::fs::write(
            &path,
            r#"{"span_id":"s1","label3":"relevant","label2":0,"status":"adjudicated"}"#,
        )
        .unwrap();
        assert!(matches!(
            load_gold(&path).unwrap_err(),
            GoldFileError::Inconsistent { line: 1, .. }
        ));
    }

    #[test]
    fn annotation_labels_serialize_with_snake_case_names() {
        let r = rec("s1", "a", NotRelevant);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"not_relevant\""), "got {json}");
        assert!(!json.contains("round"), "round omitted when None: {json}");
    }
}
