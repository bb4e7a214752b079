//! End-to-end model artifacts and their on-disk format.
//!
//! An artifact bundles everything prediction needs: the preprocessing
//! configuration, the fitted vectorizer, and the trained classifier (or
//! just the classifier for dense-embedding and baseline models). The
//! file format is a fixed binary envelope (magic, format version, model
//! kind, payload length) around a JSON payload, so version and kind
//! mismatches fail fast with a clear error instead of a parse error.

use std::fs;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{GoldSpan, GoldStatus};
use crate::classifiers::{
    majority_baseline, train_dense_head, train_knn, train_svm, DenseVector, KnnModel,
    LinearSvmModel, MajorityModel, Prediction, TrainError,
};
use crate::features::{preprocess, FeatureError, PreprocessConfig, SparseVector, TfidfModel};
use crate::spans::CandidateSpan;

pub const MODEL_MAGIC: &[u8; 4] = b"PNCL";
pub const MODEL_VERSION: u32 = 1;

const HEADER_LEN: usize = 17;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("gold standard references span_id {span_id:?} that is not in the span file")]
    UnknownGoldSpan { span_id: String },
    #[error("no embedding for span_id {span_id:?}")]
    MissingEmbedding { span_id: String },
    #[error("model was trained on dense embeddings; text classification is unavailable")]
    ExpectedDenseInput,
    #[error("model was trained on text features; dense classification is unavailable")]
    ExpectedTextInput,
    #[error("embedding has {got} components, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding for span_id {span_id:?} has a non-finite component")]
    NonFinite { span_id: String },
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// What to train. The seed feeds the SVM's example shuffling; KNN and
/// the baseline are deterministic without one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelSpec {
    Svm { lambda: f64, epochs: u32, seed: u64 },
    Knn { k: usize },
    Baseline,
    DenseSvm { lambda: f64, epochs: u32, seed: u64 },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Svm { .. } => "svm",
            ModelSpec::Knn { .. } => "knn",
            ModelSpec::Baseline => "baseline",
            ModelSpec::DenseSvm { .. } => "dense",
        }
    }
}

/// A trained, self-contained model.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelArtifact {
    TfidfSvm { preprocess: PreprocessConfig, tfidf: TfidfModel, model: LinearSvmModel },
    TfidfKnn { preprocess: PreprocessConfig, tfidf: TfidfModel, model: KnnModel },
    Baseline { model: MajorityModel },
    DenseSvm { model: LinearSvmModel },
}

/// Training rows produced by joining spans (or embeddings) with resolved
/// gold labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSpans {
    pub span_ids: Vec<String>,
    pub texts: Vec<String>,
    pub labels: Vec<u8>,
    /// Unresolved gold spans that were left out of the training set.
    pub skipped_unresolved: usize,
}

/// Joins gold labels to span texts by span_id, in gold-file order.
/// Unresolved gold spans are skipped (and counted); a gold record whose
/// span is missing is an error. Spans without gold are simply unlabeled.
pub fn join_labeled(
    spans: &[CandidateSpan],
    gold: &[GoldSpan],
) -> Result<LabeledSpans, PipelineError> {
    let by_id: std::collections::BTreeMap<&str, &CandidateSpan> =
        spans.iter().map(|s| (s.span_id.as_str(), s)).collect();
    let mut out = LabeledSpans {
        span_ids: Vec::new(),
        texts: Vec::new(),
        labels: Vec::new(),
        skipped_unresolved: 0,
    };
    for g in gold {
        let span = by_id
            .get(g.span_id.as_str())
            .ok_or_else(|| PipelineError::UnknownGoldSpan { span_id: g.span_id.clone() })?;
        if g.status == GoldStatus::Unresolved {
            out.skipped_unresolved += 1;
            continue;
        }
        out.span_ids.push(g.span_id.clone());
        out.texts.push(span.text.clone());
        out.labels.push(g.label2.expect("resolved gold spans carry a binary label"));
    }
    Ok(out)
}

/// Same join for dense embeddings: every resolved gold span must have an
/// embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEmbeddings {
    pub span_ids: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub skipped_unresolved: usize,
}

pub fn join_labeled_dense(
    embeddings: &[DenseVector],
    gold: &[GoldSpan],
) -> Result<LabeledEmbeddings, PipelineError> {
    let by_id: std::collections::BTreeMap<&str, &DenseVector> =
        embeddings.iter().map(|e| (e.span_id.as_str(), e)).collect();
    let mut out = LabeledEmbeddings {
        span_ids: Vec::new(),
        vectors: Vec::new(),
        labels: Vec::new(),
        skipped_unresolved: 0,
    };
    for g in gold {
        if g.status == GoldStatus::Unresolved {
            out.skipped_unresolved += 1;
            continue;
        }
        let embedding = by_id
            .get(g.span_id.as_str())
            .ok_or_else(|| PipelineError::MissingEmbedding { span_id: g.span_id.clone() })?;
        out.span_ids.push(g.span_id.clone());
        out.vectors.push(embedding.vector.clone());
        out.labels.push(g.label2.expect("resolved gold spans carry a binary label"));
    }
    Ok(out)
}

/// Trains a text-feature artifact. Dense specs need embeddings; use
/// [`train_dense_artifact`] for those.
pub fn train_artifact(
    texts: &[String],
    labels: &[u8],
    spec: &ModelSpec,
    config: &PreprocessConfig,
) -> Result<ModelArtifact, PipelineError> {
    match *spec {
        ModelSpec::Svm { lambda, epochs, seed } => {
            let (tfidf, x) = fit_features(texts, config)?;
            let model = train_svm(&x, labels, lambda, epochs, seed)?;
            Ok(ModelArtifact::TfidfSvm { preprocess: config.clone(), tfidf, model })
        }
        ModelSpec::Knn { k } => {
            let (tfidf, x) = fit_features(texts, config)?;
            let model = train_knn(&x, labels, k)?;
            Ok(ModelArtifact::TfidfKnn { preprocess: config.clone(), tfidf, model })
        }
        ModelSpec::Baseline => {
            let model = majority_baseline(labels)?;
            Ok(ModelArtifact::Baseline { model })
        }
        ModelSpec::DenseSvm { .. } => Err(PipelineError::ExpectedDenseInput),
    }
}

fn fit_features(
    texts: &[String],
    config: &PreprocessConfig,
) -> Result<(TfidfModel, Vec<SparseVector>), PipelineError> {
    let tokens: Vec<Vec<String>> = texts.iter().map(|t| preprocess(t, config)).collect();
    let tfidf = TfidfModel::fit(&tokens)?;
    let x = tokens.iter().map(|t| tfidf.transform(t)).collect();
    Ok((tfidf, x))
}

pub fn train_dense_artifact(
    vectors: &[Vec<f64>],
    labels: &[u8],
    lambda: f64,
    epochs: u32,
    seed: u64,
) -> Result<ModelArtifact, PipelineError> {
    let model = train_dense_head(vectors, labels, lambda, epochs, seed)?;
    Ok(ModelArtifact::DenseSvm { model })
}

impl ModelArtifact {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ModelArtifact::TfidfSvm { .. } => "svm",
            ModelArtifact::TfidfKnn { .. } => "knn",
            ModelArtifact::Baseline { .. } => "baseline",
            ModelArtifact::DenseSvm { .. } => "dense",
        }
    }

    /// Label and score for one span text.
    pub fn classify_text(&self, text: &str) -> Result<(u8, f64), PipelineError> {
        match self {
            ModelArtifact::TfidfSvm { preprocess: config, tfidf, model } => {
                let x = tfidf.transform(&preprocess(text, config));
                let score = model.score(&x);
                Ok((u8::from(score >= 0.0), score))
            }
            ModelArtifact::TfidfKnn { preprocess: config, tfidf, model } => {
                let x = tfidf.transform(&preprocess(text, config));
                Ok(model.classify(&x))
            }
            ModelArtifact::Baseline { model } => Ok((model.label, model.prior_positive)),
            ModelArtifact::DenseSvm { .. } => Err(PipelineError::ExpectedDenseInput),
        }
    }

    /// Label and score for one dense embedding.
    pub fn classify_dense(&self, span_id: &str, vector: &[f64]) -> Result<(u8, f64), PipelineError> {
        let ModelArtifact::DenseSvm { model } = self else {
            return Err(PipelineError::ExpectedTextInput);
        };
        if vector.len() != model.weights.len() {
            return Err(PipelineError::DimensionMismatch {
                expected: model.weights.len(),
                got: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(PipelineError::NonFinite { span_id: span_id.to_string() });
        }
        let x = SparseVector::from_dense(vector)
            .expect("finite components always form a valid sparse vector");
        let score = model.score(&x);
        Ok((u8::from(score >= 0.0), score))
    }
}

/// Classifies every span, in input order.
pub fn predict_spans(
    artifact: &ModelArtifact,
    spans: &[CandidateSpan],
) -> Result<Vec<Prediction>, PipelineError> {
    spans
        .iter()
        .map(|s| {
            let (label, score) = artifact.classify_text(&s.text)?;
            Ok(Prediction { span_id: s.span_id.clone(), label, score })
        })
        .collect()
}

/// Classifies every embedding, in input order.
pub fn predict_dense(
    artifact: &ModelArtifact,
    embeddings: &[DenseVector],
) -> Result<Vec<Prediction>, PipelineError> {
    embeddings
        .iter()
        .map(|e| {
            let (label, score) = artifact.classify_dense(&e.span_id, &e.vector)?;
            Ok(Prediction { span_id: e.span_id.clone(), label, score })
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: not a model file (bad magic)")]
    BadMagic { path: String },
    #[error("{path}: unsupported model format version {found}, this build reads version {MODEL_VERSION}")]
    UnsupportedVersion { path: String, found: u32 },
    #[error("{path}: unknown model kind {kind}")]
    UnknownKind { path: String, kind: u8 },
    #[error("{path}: model file is truncated or its length field is corrupt")]
    Truncated { path: String },
    #[error("{path}: model payload: {source}")]
    Payload { path: String, source: serde_json::Error },
}

#[derive(Serialize, Deserialize)]
struct TextPayload<M> {
    preprocess: PreprocessConfig,
    tfidf: TfidfModel,
    model: M,
}

fn kind_byte(artifact: &ModelArtifact) -> u8 {
    match artifact {
        ModelArtifact::TfidfSvm { .. } => 1,
        ModelArtifact::TfidfKnn { .. } => 2,
        ModelArtifact::Baseline { .. } => 3,
        ModelArtifact::DenseSvm { .. } => 4,
    }
}

pub fn save_model(path: &Path, artifact: &ModelArtifact) -> Result<(), ModelFileError> {
    let display = path.display().to_string();
    let payload = match artifact {
        ModelArtifact::TfidfSvm { preprocess, tfidf, model } => {
            serde_json::to_vec(&TextPayload {
                preprocess: preprocess.clone(),
                tfidf: tfidf.clone(),
                model: model.clone(),
            })
        }
        ModelArtifact::TfidfKnn { preprocess, tfidf, model } => {
            serde_json::to_vec(&TextPayload {
                preprocess: preprocess.clone(),
                tfidf: tfidf.clone(),
                model: model.clone(),
            })
        }
        ModelArtifact::Baseline { model } => serde_json::to_vec(model),
        ModelArtifact::DenseSvm { model } => serde_json::to_vec(model),
    }
    .map_err(|source| ModelFileError::Payload { path: display.clone(), source })?;

    let mut bytes = Vec::with_capacity(HEADER_LEN + payload.len());
    bytes.extend_from_slice(MODEL_MAGIC);
    bytes.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    bytes.push(kind_byte(artifact));
    bytes.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&payload);
    fs::write(path, bytes).map_err(|source| ModelFileError::Io { path: display, source })
}

fn parse_payload<T: DeserializeOwned>(path: &str, payload: &[u8]) -> Result<T, ModelFileError> {
    serde_json::from_slice(payload)
        .map_err(|source| ModelFileError::Payload { path: path.to_string(), source })
}

pub fn load_model(path: &Path) -> Result<ModelArtifact, ModelFileError> {
    let display = path.display().to_string();
    let bytes =
        fs::read(path).map_err(|source| ModelFileError::Io { path: display.clone(), source })?;
    if bytes.len() < HEADER_LEN {
        return Err(ModelFileError::Truncated { path: display });
    }
    if &bytes[0..4] != MODEL_MAGIC {
        return Err(ModelFileError::BadMagic { path: display });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != MODEL_VERSION {
        return Err(ModelFileError::UnsupportedVersion { path: display, found: version });
    }
    let kind = bytes[8];
    let payload_len = u64::from_le_bytes(bytes[9..17].try_into().expect("8 bytes")) as usize;
    if bytes.len() - HEADER_LEN != payload_len {
        return Err(ModelFileError::Truncated { path: display });
    }
    let payload = &bytes[HEADER_LEN..];
    match kind {
        1 => {
            let p: TextPayload<LinearSvmModel> = parse_payload(&display, payload)?;
            Ok(ModelArtifact::TfidfSvm { preprocess: p.preprocess, tfidf: p.tfidf, model: p.model })
        }
        2 => {
            let p: TextPayload<KnnModel> = parse_payload(&display, payload)?;
            Ok(ModelArtifact::TfidfKnn { preprocess: p.preprocess, tfidf: p.tfidf, model: p.model })
        }
        3 => Ok(ModelArtifact::Baseline { model: parse_payload(&display, payload)? }),
        4 => Ok(ModelArtifact::DenseSvm { model: parse_payload(&display, payload)? }),
        other => Err(ModelFileError::UnknownKind { path: display, kind: other }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::AnnotationLabel;

    fn toy_texts() -> (Vec<String>, Vec<u8>) {
        let mut texts = Vec::new();
        let mut labels = Vec::new();
        for i in 0..6 {
            texts.push(format!("sharp pain attack {i}"));
            labels.push(1);
            texts.push(format!("routine calm checkup {i}"));
            labels.push(0);
        }
        (texts, labels)
    }

    fn span(id: &str, text: &str) -> CandidateSpan {
        CandidateSpan {
            span_id: id.to_string(),
            doc_id: "D1".to_string(),
            window_start: 0,
            window_end: text.chars().count(),
            term_start: 0,
            term_end: 1,
            text: text.to_string(),
        }
    }

    fn resolved(id: &str, label3: AnnotationLabel) -> GoldSpan {
        GoldSpan {
            span_id: id.to_string(),
            label3: Some(label3),
            label2: Some(crate::annotation::binarize(label3)),
            status: GoldStatus::Adjudicated,
        }
    }

    fn unresolved(id: &str) -> GoldSpan {
        GoldSpan { span_id: id.to_string(), label3: None, label2: None, status: GoldStatus::Unresolved }
    }

    #[test]
    fn join_pairs_gold_with_span_texts() {
        let spans = vec![span("a", "pain one"), span("b", "calm two"), span("c", "extra")];
        let gold = vec![
            resolved("a", AnnotationLabel::Relevant),
            unresolved("b"),
        ];
        let joined = join_labeled(&spans, &gold).unwrap();
        assert_eq!(joined.span_ids, vec!["a"]);
        assert_eq!(joined.texts, vec!["pain one"]);
        assert_eq!(joined.labels, vec![1]);
        assert_eq!(joined.skipped_unresolved, 1);

        let missing = vec![resolved("zz", AnnotationLabel::Relevant)];
        assert!(matches!(
            join_labeled(&spans, &missing),
            Err(PipelineError::UnknownGoldSpan { .. })
        ));
    }

    #[test]
    fn dense_join_requires_an_embedding_per_resolved_span() {
        let embeddings = vec![DenseVector { span_id: "a".into(), vector: vec![1.0, 0.0] }];
        let gold = vec![resolved("a", AnnotationLabel::Negated), unresolved("b")];
        let joined = join_labeled_dense(&embeddings, &gold).unwrap();
        assert_eq!(joined.labels, vec![0]);
        assert_eq!(joined.skipped_unresolved, 1);

        let gold = vec![resolved("b", AnnotationLabel::Relevant)];
        assert!(matches!(
            join_labeled_dense(&embeddings, &gold),
            Err(PipelineError::MissingEmbedding { .. })
        ));
    }

    #[test]
    fn text_artifacts_classify_their_training_data() {
        let (texts, labels) = toy_texts();
        let config = PreprocessConfig::default();
        for spec in [
            ModelSpec::Svm { lambda: 1e-4, epochs: 20, seed: 7 },
            ModelSpec::Knn { k: 3 },
        ] {
            let artifact = train_artifact(&texts, &labels, &spec, &config).unwrap();
            for (text, &label) in texts.iter().zip(&labels) {
                let (predicted, _) = artifact.classify_text(text).unwrap();
                assert_eq!(predicted, label, "spec {spec:?} text {text:?}");
            }
        }
        let baseline = train_artifact(&texts, &labels, &ModelSpec::Baseline, &config).unwrap();
        let (label, score) = baseline.classify_text("anything").unwrap();
        assert_eq!(label, 1);
        assert_eq!(score, 0.5);
    }

    #[test]
    fn input_kind_mismatches_are_rejected() {
        let (texts, labels) = toy_texts();
        let config = PreprocessConfig::default();
        let text_model =
            train_artifact(&texts, &labels, &ModelSpec::Baseline, &config).unwrap();
        assert!(matches!(
            text_model.classify_dense("a", &[1.0]),
            Err(PipelineError::ExpectedTextInput)
        ));

        let dense = train_dense_artifact(
            &[vec![1.0, 0.0], vec![0.9, 0.0], vec![0.0, 1.0], vec![0.0, 0.9]],
            &[1, 1, 0, 0],
            1e-4,
            20,
            7,
        )
        .unwrap();
        assert!(matches!(
            dense.classify_text("pain"),
            Err(PipelineError::ExpectedDenseInput)
        ));
        assert!(matches!(
            dense.classify_dense("a", &[1.0]),
            Err(PipelineError::DimensionMismatch { expected: 2, got: 1 })
        ));
        assert!(matches!(
            dense.classify_dense("a", &[1.0, f64::NAN]),
            Err(PipelineError::NonFinite { .. })
        ));
        let (label, _) = dense.classify_dense("a", &[1.0, 0.0]).unwrap();
        assert_eq!(label, 1);

        let err = train_artifact(
            &texts,
            &labels,
            &ModelSpec::DenseSvm { lambda: 1e-4, epochs: 20, seed: 7 },
            &config,
        )
        .unwrap_err();
        assert!(matches!(err, PipelineError::ExpectedDenseInput));
    }

    #[test]
    fn model_files_round_trip_all_kinds() {
        let dir = tempfile::tempdir().unwrap();
        let (texts, labels) = toy_texts();
        let config = PreprocessConfig::default();
        let artifacts = [
            train_artifact(&texts, &labels, &ModelSpec::Svm { lambda: 1e-4, epochs: 20, seed: 7 }, &config)
                .unwrap(),
            train_artifact(&texts, &labels, &ModelSpec::Knn { k: 3 }, &config).unwrap(),
            train_artifact(&texts, &labels, &ModelSpec::Baseline, &config).unwrap(),
            train_dense_artifact(
                &[vec![1.0, 0.0], vec![0.9, 0.1], vec![0.0, 1.0], vec![0.1, 0.9]],
                &[1, 1, 0, 0],
                1e-4,
                20,
                7,
            )
            .unwrap(),
        ];
        for (i, artifact) in artifacts.iter().enumerate() {
            let path = dir.path().join(format!("model-{i}.bin"));
            save_model(&path, artifact).unwrap();
            let loaded = load_model(&path).unwrap();
            assert_eq!(&loaded, artifact);
        }
    }

    #[test]
    fn predictions_survive_a_save_load_cycle_bit_for_bit() {
        let dir = tempfile::tempdir().unwrap();
        let (texts, labels) = toy_texts();
        let spec = ModelSpec::Svm { lambda: 1e-4, epochs: 20, seed: 11 };
        let artifact =
            train_artifact(&texts, &labels, &spec, &PreprocessConfig::default()).unwrap();
        let spans: Vec<CandidateSpan> =
            texts.iter().enumerate().map(|(i, t)| span(&format!("s{i}"), t)).collect();
        let before = predict_spans(&artifact, &spans).unwrap();
        let path = dir.path().join("model.bin");
        save_model(&path, &artifact).unwrap();
        let after = predict_spans(&load_model(&path).unwrap(), &spans).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn the_envelope_rejects_foreign_and_damaged_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");

        fs::write(&path, b"not a model at all").unwrap();
        assert!(matches!(load_model(&path), Err(ModelFileError::BadMagic { .. })));

        fs::write(&path, b"PNCL").unwrap();
        assert!(matches!(load_model(&path), Err(ModelFileError::Truncated { .. })));

        let baseline = ModelArtifact::Baseline {
            model: crate::classifiers::MajorityModel { label: 1, prior_positive: 0.6 },
        };
        save_model(&path, &baseline).unwrap();
        let mut bytes = fs::read(&path).unwrap();

        let mut wrong_version = bytes.clone();
        wrong_version[4..8].copy_from_slice(&2u32.to_le_bytes());
        fs::write(&path, &wrong_version).unwrap();
        assert!(matches!(
            load_model(&path),
            Err(ModelFileError::UnsupportedVersion { found: 2, .. })
        ));

        let mut wrong_kind = bytes.clone();
        wrong_kind[8] = 9;
        fs::write(&path, &wrong_kind).unwrap();
        assert!(matches!(load_model(&path), Err(ModelFileError::UnknownKind { kind: 9, .. })));

        bytes.pop();
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_model(&path), Err(ModelFileError::Truncated { .. })));
    }
}
