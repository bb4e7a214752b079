//! Stratified evaluation: train/test/validation splits, k-fold
//! cross-validation with Student-t confidence intervals, and ranked
//! error reports.
//!
//! All index shuffling comes from one seeded stream per call, so splits,
//! folds, and the reports built from them are reproducible byte for byte.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::annotation::{GoldSpan, GoldStatus};
use crate::classifiers::{
    majority_baseline, train_knn, train_svm, KnnModel, LinearSvmModel, MajorityModel, Prediction,
    TrainError,
};
use crate::features::{FeatureError, PreprocessConfig, SparseVector, TfidfModel};
use crate::pipeline::ModelSpec;
use crate::spans::CandidateSpan;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty input")]
    EmptyInput,
    #[error("{count} items but {labels} labels")]
    LengthMismatch { count: usize, labels: usize },
    #[error("label {label} is not 0 or 1")]
    BadLabel { label: u8 },
    #[error("split fractions must be nonnegative and sum to 1, got {0}")]
    BadFractions(String),
    #[error("split part {part:?} is empty; not enough spans for the requested fractions")]
    EmptyPart { part: &'static str },
    #[error("split part {part:?} contains a single class; not enough spans per class")]
    SingleClassPart { part: &'static str },
    #[error("cross-validation needs at least 2 folds, got {0}")]
    TooFewFolds(usize),
    #[error("class {label} has {count} spans, fewer than the {k} folds")]
    ClassSmallerThanFolds { label: u8, count: usize, k: usize },
    #[error("prediction references unknown span_id {span_id:?}")]
    UnknownSpan { span_id: String },
    #[error("span_id {span_id:?} is unresolved in the gold standard")]
    UnresolvedGold { span_id: String },
    #[error("dense-embedding model specs have no text pipeline; use the dense entry points")]
    DenseSpecOnSparsePath,
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

fn validate_labels(n: usize, labels: &[u8]) -> Result<(), EvalError> {
    if n == 0 {
        return Err(EvalError::EmptyInput);
    }
    if n != labels.len() {
        return Err(EvalError::LengthMismatch { count: n, labels: labels.len() });
    }
    if let Some(&label) = labels.iter().find(|&&l| l > 1) {
        return Err(EvalError::BadLabel { label });
    }
    Ok(())
}

/// Fractions for a three-way split, applied per class. Part order is
/// train, test, validation; remainder ties go to the earlier part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub test: f64,
    pub validation: f64,
    pub seed: u64,
}

impl SplitSpec {
    /// The standard 80/10/10 evaluation split.
    pub fn standard(seed: u64) -> Self {
        SplitSpec { train: 0.8, test: 0.1, validation: 0.1, seed }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let parts = [self.train, self.test, self.validation];
        if parts.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(EvalError::BadFractions(format!("{parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(EvalError::BadFractions(format!("{parts:?} (sum {sum})")));
        }
        Ok(())
    }
}

/// Index sets for one split; each is sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitParts {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Largest-remainder apportionment of n items over the given fractions.
/// Ties in remainder go to the lower part index, so results are exact
/// and deterministic.
fn largest_remainder(n: usize, fractions: &[f64]) -> Vec<usize> {
    let mut counts: Vec<usize> = Vec::with_capacity(fractions.len());
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(fractions.len());
    for (i, f) in fractions.iter().enumerate() {
        let exact = n as f64 * f;
        let base = exact.floor() as usize;
        counts.push(base);
        remainders.push((exact - base as f64, i));
    }
    let assigned: usize = counts.iter().sum();
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in remainders.iter().take(n - assigned) {
        counts[i] += 1;
    }
    counts
}

fn class_indices(labels: &[u8]) -> [Vec<usize>; 2] {
    let mut by_class = [Vec::new(), Vec::new()];
    for (i, &label) in labels.iter().enumerate() {
        by_class[label as usize].push(i);
    }
    by_class
}

/// Splits span indices into train/test/validation, stratified by label:
/// each class is shuffled and apportioned separately so every part keeps
/// the corpus class balance to within one span per class. Errors when a
/// part comes out empty or single-class.
pub fn stratified_split(labels: &[u8], spec: &SplitSpec) -> Result<SplitParts, EvalError> {
    validate_labels(labels.len(), labels)?;
    spec.validate()?;
    let fractions = [spec.train, spec.test, spec.validation];
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let mut parts: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut part_class_counts = [[0usize; 2]; 3];
    for (class, mut indices) in class_indices(labels).into_iter().enumerate() {
        indices.shuffle(&mut rng);
        let counts = largest_remainder(indices.len(), &fractions);
        let mut cursor = 0;
        for (part, &take) in counts.iter().enumerate() {
            parts[part].extend_from_slice(&indices[cursor..cursor + take]);
            part_class_counts[part][class] = take;
            cursor += take;
        }
    }
    const NAMES: [&str; 3] = ["train", "test", "validation"];
    for (part, name) in NAMES.iter().enumerate() {
        let [neg, pos] = part_class_counts[part];
        if neg + pos == 0 {
            return Err(EvalError::EmptyPart { part: name });
        }
        if neg == 0 || pos == 0 {
            return Err(EvalError::SingleClassPart { part: name });
        }
    }
    for part in &mut parts {
        part.sort_unstable();
    }
    let [train, test, validation] = parts;
    Ok(SplitParts { train, test, validation })
}

/// Splits span indices into k folds, stratified by label: within each
/// class the first (count mod k) folds receive one extra span, so fold
/// class counts differ from exact proportionality by less than 1. Errors
/// when either class has fewer spans than folds, which guarantees every
/// fold and every training complement contains both classes.
pub fn make_stratified_folds(
    labels: &[u8],
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, EvalError> {
    validate_labels(labels.len(), labels)?;
    if k < 2 {
        return Err(EvalError::TooFewFolds(k));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (class, mut indices) in class_indices(labels).into_iter().enumerate() {
        if indices.len() < k {
            return Err(EvalError::ClassSmallerThanFolds {
                label: class as u8,
                count: indices.len(),
                k,
            });
        }
        indices.shuffle(&mut rng);
        let base = indices.len() / k;
        let extra = indices.len() % k;
        let mut cursor = 0;
        for (fold, slot) in folds.iter_mut().enumerate() {
            let take = base + usize::from(fold < extra);
            slot.extend_from_slice(&indices[cursor..cursor + take]);
            cursor += take;
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

/// Confusion counts with the derived rates. Zero denominators yield 0.0
/// rather than NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn confusion_metrics(tp: usize, fp: usize, fn_: usize, tn: usize) -> Metrics {
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = f1_score(precision, recall);
    Metrics { tp, fp, fn_, tn, precision, recall, f1 }
}

/// Scores predictions against resolved gold labels, joined on span_id.
/// Every prediction must have a resolved gold span; extra gold spans are
/// ignored.
pub fn compute_metrics(predictions: &[Prediction], gold: &[GoldSpan]) -> Result<Metrics, EvalError> {
    let by_id: BTreeMap<&str, &GoldSpan> =
        gold.iter().map(|g| (g.span_id.as_str(), g)).collect();
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for p in predictions {
        let g = by_id
            .get(p.span_id.as_str())
            .ok_or_else(|| EvalError::UnknownSpan { span_id: p.span_id.clone() })?;
        if g.status == GoldStatus::Unresolved {
            return Err(EvalError::UnresolvedGold { span_id: p.span_id.clone() });
        }
        let truth = g.label2.expect("resolved gold spans carry a binary label");
        match (p.label, truth) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 1) => fn_ += 1,
            _ => tn += 1,
        }
    }
    Ok(confusion_metrics(tp, fp, fn_, tn))
}

/// Per-metric mean over folds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// 95% confidence intervals over folds, clipped to [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiSummary {
    pub method: String,
    pub precision: [f64; 2],
    pub recall: [f64; 2],
    pub f1: [f64; 2],
}

/// Fold metrics plus their mean and confidence intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsWithCi {
    pub folds: Vec<Metrics>,
    pub mean: MetricSummary,
    pub ci95: CiSummary,
}

/// Two-sided 95% interval mean +/- t(0.975, k-1) s / sqrt(k), clipped to
/// [0, 1]. Zero sample variance yields a zero-width interval.
fn t_interval(values: &[f64]) -> (f64, [f64; 2]) {
    let k = values.len();
    let mean = values.iter().sum::<f64>() / k as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1) as f64;
    if var == 0.0 {
        return (mean, [mean.clamp(0.0, 1.0), mean.clamp(0.0, 1.0)]);
    }
    let t = StudentsT::new(0.0, 1.0, (k - 1) as f64)
        .expect("k >= 2 gives a valid degrees-of-freedom")
        .inverse_cdf(0.975);
    let half = t * (var / k as f64).sqrt();
    (mean, [(mean - half).clamp(0.0, 1.0), (mean + half).clamp(0.0, 1.0)])
}

fn summarize(folds: Vec<Metrics>) -> MetricsWithCi {
    let take = |f: fn(&Metrics) -> f64| -> Vec<f64> { folds.iter().map(f).collect() };
    let (p_mean, p_ci) = t_interval(&take(|m| m.precision));
    let (r_mean, r_ci) = t_interval(&take(|m| m.recall));
    let (f_mean, f_ci) = t_interval(&take(|m| m.f1));
    MetricsWithCi {
        folds,
        mean: MetricSummary { precision: p_mean, recall: r_mean, f1: f_mean },
        ci95: CiSummary {
            method: "student-t".to_string(),
            precision: p_ci,
            recall: r_ci,
            f1: f_ci,
        },
    }
}

enum FoldModel {
    Svm(LinearSvmModel),
    Knn(KnnModel),
    Baseline(MajorityModel),
}

impl FoldModel {
    fn predict(&self, x: &SparseVector) -> u8 {
        match self {
            FoldModel::Svm(m) => m.predict(x),
            FoldModel::Knn(m) => m.predict(x),
            FoldModel::Baseline(m) => m.predict(x),
        }
    }
}

fn fit_fold(
    tokens: &[Vec<String>],
    labels: &[u8],
    train: &[usize],
    spec: &ModelSpec,
    seed_offset: u64,
) -> Result<(TfidfModel, FoldModel), EvalError> {
    let train_tokens: Vec<Vec<String>> = train.iter().map(|&i| tokens[i].clone()).collect();
    let tfidf = TfidfModel::fit(&train_tokens)?;
    let x: Vec<SparseVector> = train_tokens.iter().map(|t| tfidf.transform(t)).collect();
    let y: Vec<u8> = train.iter().map(|&i| labels[i]).collect();
    let model = match spec {
        ModelSpec::Svm { lambda, epochs, seed } => {
            FoldModel::Svm(train_svm(&x, &y, *lambda, *epochs, seed.wrapping_add(seed_offset))?)
        }
        ModelSpec::Knn { k } => FoldModel::Knn(train_knn(&x, &y, *k)?),
        ModelSpec::Baseline => FoldModel::Baseline(majority_baseline(&y)?),
        ModelSpec::DenseSvm { .. } => return Err(EvalError::DenseSpecOnSparsePath),
    };
    Ok((tfidf, model))
}

fn eval_part(
    tfidf: &TfidfModel,
    model: &FoldModel,
    tokens: &[Vec<String>],
    labels: &[u8],
    part: &[usize],
) -> Metrics {
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for &i in part {
        let predicted = model.predict(&tfidf.transform(&tokens[i]));
        match (predicted, labels[i]) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 1) => fn_ += 1,
            _ => tn += 1,
        }
    }
    confusion_metrics(tp, fp, fn_, tn)
}

/// Stratified k-fold cross-validation over span texts. Preprocessing is
/// stateless, so tokens are computed once; the vectorizer is refit on
/// each fold's training part only. Fold f trains with the model seed plus
/// f, so folds differ in shuffling but reruns are identical.
pub fn kfold_cv(
    texts: &[String],
    labels: &[u8],
    spec: &ModelSpec,
    preprocess: &PreprocessConfig,
    k: usize,
    seed: u64,
) -> Result<MetricsWithCi, EvalError> {
    validate_labels(texts.len(), labels)?;
    let tokens: Vec<Vec<String>> =
        texts.iter().map(|t| crate::features::preprocess(t, preprocess)).collect();
    let folds = make_stratified_folds(labels, k, seed)?;
    let mut fold_metrics = Vec::with_capacity(k);
    for (f, test) in folds.iter().enumerate() {
        let mut train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|&(other, _)| other != f)
            .flat_map(|(_, fold)| fold.iter().copied())
            .collect();
        train.sort_unstable();
        let (tfidf, model) = fit_fold(&tokens, labels, &train, spec, f as u64)?;
        fold_metrics.push(eval_part(&tfidf, &model, &tokens, labels, test));
    }
    Ok(summarize(fold_metrics))
}

/// Cross-validation for precomputed dense embeddings: same folds as
/// [`kfold_cv`], linear SVM head per fold.
pub fn kfold_cv_dense(
    vectors: &[Vec<f64>],
    labels: &[u8],
    lambda: f64,
    epochs: u32,
    k: usize,
    seed: u64,
) -> Result<MetricsWithCi, EvalError> {
    validate_labels(vectors.len(), labels)?;
    let folds = make_stratified_folds(labels, k, seed)?;
    let mut fold_metrics = Vec::with_capacity(k);
    for (f, test) in folds.iter().enumerate() {
        let mut train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|&(other, _)| other != f)
            .flat_map(|(_, fold)| fold.iter().copied())
            .collect();
        train.sort_unstable();
        let train_x: Vec<Vec<f64>> = train.iter().map(|&i| vectors[i].clone()).collect();
        let train_y: Vec<u8> = train.iter().map(|&i| labels[i]).collect();
        let model = crate::classifiers::train_dense_head(
            &train_x,
            &train_y,
            lambda,
            epochs,
            seed.wrapping_add(f as u64),
        )?;
        let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
        for &i in test {
            let x = SparseVector::from_dense(&vectors[i])
                .map_err(|_| TrainError::NonFiniteEmbedding { index: i })?;
            match (model.predict(&x), labels[i]) {
                (1, 1) => tp += 1,
                (1, 0) => fp += 1,
                (0, 1) => fn_ += 1,
                _ => tn += 1,
            }
        }
        fold_metrics.push(confusion_metrics(tp, fp, fn_, tn));
    }
    Ok(summarize(fold_metrics))
}

/// Fixed-split evaluation: the train part fits the vectorizer and the
/// model once, then test and validation parts are scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEvaluation {
    pub train_size: usize,
    pub test: Metrics,
    pub validation: Metrics,
}

pub fn train_eval_split(
    texts: &[String],
    labels: &[u8],
    spec: &ModelSpec,
    preprocess: &PreprocessConfig,
    split: &SplitSpec,
) -> Result<SplitEvaluation, EvalError> {
    validate_labels(texts.len(), labels)?;
    let tokens: Vec<Vec<String>> =
        texts.iter().map(|t| crate::features::preprocess(t, preprocess)).collect();
    let parts = stratified_split(labels, split)?;
    let (tfidf, model) = fit_fold(&tokens, labels, &parts.train, spec, 0)?;
    Ok(SplitEvaluation {
        train_size: parts.train.len(),
        test: eval_part(&tfidf, &model, &tokens, labels, &parts.test),
        validation: eval_part(&tfidf, &model, &tokens, labels, &parts.validation),
    })
}

/// Fixed-split evaluation for precomputed dense embeddings.
pub fn train_eval_split_dense(
    vectors: &[Vec<f64>],
    labels: &[u8],
    lambda: f64,
    epochs: u32,
    split: &SplitSpec,
) -> Result<SplitEvaluation, EvalError> {
    validate_labels(vectors.len(), labels)?;
    let parts = stratified_split(labels, split)?;
    let train_x: Vec<Vec<f64>> = parts.train.iter().map(|&i| vectors[i].clone()).collect();
    let train_y: Vec<u8> = parts.train.iter().map(|&i| labels[i]).collect();
    let model =
        crate::classifiers::train_dense_head(&train_x, &train_y, lambda, epochs, split.seed)?;
    let eval = |part: &[usize]| -> Result<Metrics, EvalError> {
        let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
        for &i in part {
            let x = SparseVector::from_dense(&vectors[i])
                .map_err(|_| TrainError::NonFiniteEmbedding { index: i })?;
            match (model.predict(&x), labels[i]) {
                (1, 1) => tp += 1,
                (1, 0) => fp += 1,
                (0, 1) => fn_ += 1,
                _ => tn += 1,
            }
        }
        Ok(confusion_metrics(tp, fp, fn_, tn))
    };
    Ok(SplitEvaluation {
        train_size: parts.train.len(),
        test: eval(&parts.test)?,
        validation: eval(&parts.validation)?,
    })
}

/// The full cross-validation report written by the command-line tool.
/// Field order is the file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub model: String,
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<Metrics>,
    pub mean: MetricSummary,
    pub ci95: CiSummary,
    pub pipeline_config: serde_json::Value,
    pub lexicon_version: String,
}

/// One misclassified span: the classifier score and the span text with
/// the triggering lexicon term bracketed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCase {
    pub span_id: String,
    pub score: f64,
    pub excerpt: String,
}

/// False positives and false negatives, each sorted by |score|
/// descending (most confident mistakes first), span_id breaking ties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub false_positives: Vec<ErrorCase>,
    pub false_negatives: Vec<ErrorCase>,
}

fn bracket_term(span: &CandidateSpan) -> String {
    let rel_start = span.term_start - span.window_start;
    let rel_end = span.term_end - span.window_start;
    let mut out = String::with_capacity(span.text.len() + 2);
    for (i, c) in span.text.chars().enumerate() {
        if i == rel_start {
            out.push('[');
        }
        out.push(c);
        if i + 1 == rel_end {
            out.push(']');
        }
    }
    out
}

/// Builds the ranked error report for a set of predictions.
pub fn error_report(
    predictions: &[Prediction],
    gold: &[GoldSpan],
    spans: &[CandidateSpan],
) -> Result<ErrorReport, EvalError> {
    let gold_by_id: BTreeMap<&str, &GoldSpan> =
        gold.iter().map(|g| (g.span_id.as_str(), g)).collect();
    let span_by_id: BTreeMap<&str, &CandidateSpan> =
        spans.iter().map(|s| (s.span_id.as_str(), s)).collect();
    let mut false_positives = Vec::new();
    let mut false_negatives = Vec::new();
    for p in predictions {
        let g = gold_by_id
            .get(p.span_id.as_str())
            .ok_or_else(|| EvalError::UnknownSpan { span_id: p.span_id.clone() })?;
        if g.status == GoldStatus::Unresolved {
            return Err(EvalError::UnresolvedGold { span_id: p.span_id.clone() });
        }
        let truth = g.label2.expect("resolved gold spans carry a binary label");
        if p.label == truth {
            continue;
        }
        let span = span_by_id
            .get(p.span_id.as_str())
            .ok_or_else(|| EvalError::UnknownSpan { span_id: p.span_id.clone() })?;
        let case = ErrorCase {
            span_id: p.span_id.clone(),
            score: p.score,
            excerpt: bracket_term(span),
        };
        if p.label == 1 {
            false_positives.push(case);
        } else {
            false_negatives.push(case);
        }
    }
    let rank = |cases: &mut Vec<ErrorCase>| {
        cases.sort_by(|a, b| {
            b.score
                .abs()
                .total_cmp(&a.score.abs())
                .then_with(|| a.span_id.cmp(&b.span_id))
        });
    };
    rank(&mut false_positives);
    rank(&mut false_negatives);
    Ok(ErrorReport { false_positives, false_negatives })
}
