//! Binary classifiers over sparse and dense feature vectors.
//!
//! Labels are 0 (not a pain mention) and 1 (pain mention). Three trainers
//! share one contract: a linear SVM fit by stochastic subgradient descent,
//! an exact k-nearest-neighbor classifier, and a majority-class baseline.
//! A fourth path reuses the SVM on externally produced dense embeddings.
//! All training is deterministic given the seed.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::SparseVector;
use crate::jsonl::{self, JsonlError};

pub const DEFAULT_LAMBDA: f64 = 1e-4;
pub const DEFAULT_EPOCHS: u32 = 20;
pub const DEFAULT_NEIGHBORS: usize = 5;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("single-class training set")]
    SingleClass,
    #[error("{count} feature vectors but {labels} labels")]
    LengthMismatch { count: usize, labels: usize },
    #[error("label {label} is not 0 or 1")]
    BadLabel { label: u8 },
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid hyperparameter: {0}")]
    BadHyperparameter(String),
    #[error("embedding {index} has a non-finite component")]
    NonFiniteEmbedding { index: usize },
}

fn validate_labels(n: usize, y: &[u8]) -> Result<(), TrainError> {
    if n == 0 {
        return Err(TrainError::EmptyTrainingSet);
    }
    if n != y.len() {
        return Err(TrainError::LengthMismatch { count: n, labels: y.len() });
    }
    if let Some(&label) = y.iter().find(|&&l| l > 1) {
        return Err(TrainError::BadLabel { label });
    }
    if y.iter().all(|&l| l == y[0]) {
        return Err(TrainError::SingleClass);
    }
    Ok(())
}

fn validate_dims(x: &[SparseVector]) -> Result<usize, TrainError> {
    let dim = x[0].dim;
    for v in x {
        if v.dim != dim {
            return Err(TrainError::DimensionMismatch { expected: dim, got: v.dim });
        }
    }
    Ok(dim)
}

fn signed(label: u8) -> f64 {
    if label == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Linear SVM in primal form: minimize
/// (lambda / 2) ||w||^2 + mean(max(0, 1 - y (w.x + b))).
/// The bias is unregularized. Scores are w.x + b; label 1 iff score >= 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
    pub epochs: u32,
    pub seed: u64,
    /// Primal objective of the returned weights on the training set.
    /// Never exceeds 1.0, the objective of the zero model.
    pub objective: f64,
}

impl LinearSvmModel {
    pub fn score(&self, x: &SparseVector) -> f64 {
        assert_eq!(x.dim, self.weights.len(), "feature dimension mismatch");
        x.dot_dense(&self.weights) + self.bias
    }

    pub fn predict(&self, x: &SparseVector) -> u8 {
        u8::from(self.score(x) >= 0.0)
    }
}

/// Primal objective value for explicit weights on a labeled set.
pub fn svm_objective(weights: &[f64], bias: f64, x: &[SparseVector], y: &[u8], lambda: f64) -> f64 {
    let reg = 0.5 * lambda * weights.iter().map(|w| w * w).sum::<f64>();
    let hinge: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, &yi)| (1.0 - signed(yi) * (xi.dot_dense(weights) + bias)).max(0.0))
        .sum();
    reg + hinge / x.len() as f64
}

/// Subgradient of the primal objective at (weights, bias): the
/// regularizer gradient plus the mean of -y x over margin violators
/// (y (w.x + b) < 1). At a kink the violating side is chosen.
pub fn svm_subgradient(
    weights: &[f64],
    bias: f64,
    x: &[SparseVector],
    y: &[u8],
    lambda: f64,
) -> (Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut grad_w: Vec<f64> = weights.iter().map(|w| lambda * w).collect();
    let mut grad_b = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        let sy = signed(yi);
        if sy * (xi.dot_dense(weights) + bias) < 1.0 {
            for &(j, v) in &xi.entries {
                grad_w[j] -= sy * v / n;
            }
            grad_b -= sy / n;
        }
    }
    (grad_w, grad_b)
}

/// Stochastic subgradient training with per-step learning rate
/// 1 / (lambda t), one margin check per example per epoch, projection
/// onto the ball of radius 1 / sqrt(lambda), and a per-epoch shuffle
/// drawn from a single seeded stream. The weight vector is kept as
/// scale * v so decay is O(1) per step.
pub fn train_svm(
    x: &[SparseVector],
    y: &[u8],
    lambda: f64,
    epochs: u32,
    seed: u64,
) -> Result<LinearSvmModel, TrainError> {
    validate_labels(x.len(), y)?;
    let dim = validate_dims(x)?;
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(TrainError::BadHyperparameter(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    if epochs == 0 {
        return Err(TrainError::BadHyperparameter("epochs must be at least 1".into()));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut v = vec![0.0_f64; dim];
    let mut vnorm2 = 0.0_f64;
    let mut scale = 1.0_f64;
    let mut bias = 0.0_f64;
    let mut t = 0_u64;

    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let xi = &x[i];
            let sy = signed(y[i]);
            let violated = sy * (scale * xi.dot_dense(&v) + bias) < 1.0;
            // While v is zero the scale is irrelevant, and resetting it
            // dodges the t = 1 step where the decay factor is zero.
            if vnorm2 == 0.0 {
                scale = 1.0;
            } else {
                scale *= 1.0 - eta * lambda;
            }
            if violated {
                let step = eta * sy / scale;
                for &(j, value) in &xi.entries {
                    let delta = step * value;
                    vnorm2 += 2.0 * v[j] * delta + delta * delta;
                    v[j] += delta;
                }
                bias += eta.min(1.0) * sy;
            }
            let wnorm2 = scale * scale * vnorm2;
            if wnorm2 > 1.0 / lambda {
                scale *= (1.0 / (lambda * wnorm2)).sqrt();
            }
        }
    }

    let weights: Vec<f64> = v.iter().map(|&vj| scale * vj).collect();
    let objective = svm_objective(&weights, bias, x, y, lambda);
    // The zero model scores objective exactly 1.0, so anything worse (or
    // non-finite) is replaced by it.
    if !objective.is_finite() || objective > 1.0 {
        return Ok(LinearSvmModel {
            weights: vec![0.0; dim],
            bias: 0.0,
            lambda,
            epochs,
            seed,
            objective: 1.0,
        });
    }
    Ok(LinearSvmModel { weights, bias, lambda, epochs, seed, objective })
}

/// Exact k-nearest-neighbor classifier. Distances are squared Euclidean
/// (the square root is monotone, so nearest sets are unchanged); ties in
/// distance break toward the lower training index, and a tied vote takes
/// the label of the single nearest neighbor. The score is the fraction
/// of positive neighbors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub train_x: Vec<SparseVector>,
    pub train_y: Vec<u8>,
}

pub fn train_knn(x: &[SparseVector], y: &[u8], k: usize) -> Result<KnnModel, TrainError> {
    validate_labels(x.len(), y)?;
    validate_dims(x)?;
    if k == 0 {
        return Err(TrainError::BadHyperparameter("k must be at least 1".into()));
    }
    if k > x.len() {
        return Err(TrainError::BadHyperparameter(format!(
            "k = {k} exceeds the training set size {}",
            x.len()
        )));
    }
    Ok(KnnModel { k, train_x: x.to_vec(), train_y: y.to_vec() })
}

impl KnnModel {
    /// Indices of the k nearest training points, nearest first.
    fn neighbors(&self, x: &SparseVector) -> Vec<usize> {
        assert_eq!(x.dim, self.train_x[0].dim, "feature dimension mismatch");
        let mut dist: Vec<(f64, usize)> = self
            .train_x
            .iter()
            .enumerate()
            .map(|(i, t)| (t.squared_distance(x), i))
            .collect();
        dist.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        dist.truncate(self.k);
        dist.into_iter().map(|(_, i)| i).collect()
    }

    /// Majority label and positive-vote fraction. On a tied vote the
    /// label of the single nearest neighbor decides, but the score stays
    /// the raw fraction.
    pub fn classify(&self, x: &SparseVector) -> (u8, f64) {
        let neighbors = self.neighbors(x);
        let positive = neighbors.iter().filter(|&&i| self.train_y[i] == 1).count();
        let negative = self.k - positive;
        let label = match positive.cmp(&negative) {
            std::cmp::Ordering::Greater => 1,
            std::cmp::Ordering::Less => 0,
            std::cmp::Ordering::Equal => self.train_y[neighbors[0]],
        };
        (label, positive as f64 / self.k as f64)
    }

    pub fn score(&self, x: &SparseVector) -> f64 {
        self.classify(x).1
    }

    pub fn predict(&self, x: &SparseVector) -> u8 {
        self.classify(x).0
    }
}

/// Predicts the most frequent training label for every input; ties go to
/// 1. The constant score is the positive-class prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajorityModel {
    pub label: u8,
    pub prior_positive: f64,
}

pub fn majority_baseline(y: &[u8]) -> Result<MajorityModel, TrainError> {
    if y.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    if let Some(&label) = y.iter().find(|&&l| l > 1) {
        return Err(TrainError::BadLabel { label });
    }
    let positive = y.iter().filter(|&&l| l == 1).count();
    Ok(MajorityModel {
        label: u8::from(2 * positive >= y.len()),
        prior_positive: positive as f64 / y.len() as f64,
    })
}

impl MajorityModel {
    pub fn score(&self, _x: &SparseVector) -> f64 {
        self.prior_positive
    }

    pub fn predict(&self, _x: &SparseVector) -> u8 {
        self.label
    }
}

/// Span embedding produced outside this crate (for example by a
/// transformer encoder). Vectors in one file must share a dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseVector {
    pub span_id: String,
    pub vector: Vec<f64>,
}

/// Trains the linear SVM head on dense embeddings.
pub fn train_dense_head(
    vectors: &[Vec<f64>],
    y: &[u8],
    lambda: f64,
    epochs: u32,
    seed: u64,
) -> Result<LinearSvmModel, TrainError> {
    validate_labels(vectors.len(), y)?;
    let dim = vectors[0].len();
    let mut x = Vec::with_capacity(vectors.len());
    for (index, vector) in vectors.iter().enumerate() {
        if vector.len() != dim {
            return Err(TrainError::DimensionMismatch { expected: dim, got: vector.len() });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(TrainError::NonFiniteEmbedding { index });
        }
        let sparse = SparseVector::from_dense(vector)
            .expect("finite components always form a valid sparse vector");
        x.push(sparse);
    }
    train_svm(&x, y, lambda, epochs, seed)
}

/// One classified span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub span_id: String,
    pub label: u8,
    pub score: f64,
}

#[derive(Debug, Error)]
pub enum VectorFileError {
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("{path} line {line}: duplicate span_id {span_id:?}")]
    DuplicateSpanId { path: String, line: usize, span_id: String },
    #[error("{path} line {line}: embedding for {span_id:?} is empty")]
    EmptyEmbedding { path: String, line: usize, span_id: String },
    #[error("{path} line {line}: embedding for {span_id:?} has a non-finite component")]
    NonFiniteEmbedding { path: String, line: usize, span_id: String },
    #[error("{path} line {line}: embedding for {span_id:?} has {got} components, expected {expected}")]
    RaggedEmbedding { path: String, line: usize, span_id: String, expected: usize, got: usize },
    #[error("{path} line {line}: label {label} is not 0 or 1")]
    BadLabel { path: String, line: usize, label: u8 },
}

fn check_unique(
    path: &Path,
    seen: &mut std::collections::HashSet<String>,
    line: usize,
    span_id: &str,
) -> Result<(), VectorFileError> {
    if !seen.insert(span_id.to_string()) {
        return Err(VectorFileError::DuplicateSpanId {
            path: path.display().to_string(),
            line,
            span_id: span_id.to_string(),
        });
    }
    Ok(())
}

/// Loads span embeddings, enforcing unique ids, finite components, and a
/// single shared dimension.
pub fn load_embeddings(path: &Path) -> Result<Vec<DenseVector>, VectorFileError> {
    let numbered: Vec<(usize, DenseVector)> = jsonl::read_numbered(path)?;
    let mut seen = std::collections::HashSet::new();
    let mut expected_dim: Option<usize> = None;
    let mut out = Vec::with_capacity(numbered.len());
    for (line, record) in numbered {
        check_unique(path, &mut seen, line, &record.span_id)?;
        if record.vector.is_empty() {
            return Err(VectorFileError::EmptyEmbedding {
                path: path.display().to_string(),
                line,
                span_id: record.span_id,
            });
        }
        if record.vector.iter().any(|v| !v.is_finite()) {
            return Err(VectorFileError::NonFiniteEmbedding {
                path: path.display().to_string(),
                line,
                span_id: record.span_id,
            });
        }
        let expected = *expected_dim.get_or_insert(record.vector.len());
        if record.vector.len() != expected {
            return Err(VectorFileError::RaggedEmbedding {
                path: path.display().to_string(),
                line,
                span_id: record.span_id,
                expected,
                got: record.vector.len(),
            });
        }
        out.push(record);
    }
    Ok(out)
}

pub fn save_embeddings(path: &Path, embeddings: &[DenseVector]) -> Result<(), JsonlError> {
    jsonl::write_records(path, embeddings)
}

pub fn load_predictions(path: &Path) -> Result<Vec<Prediction>, VectorFileError> {
    let numbered: Vec<(usize, Prediction)> = jsonl::read_numbered(path)?;
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(numbered.len());
    for (line, record) in numbered {
        check_unique(path, &mut seen, line, &record.span_id)?;
        if record.label > 1 {
            return Err(VectorFileError::BadLabel {
                path: path.display().to_string(),
                line,
                label: record.label,
            });
        }
        out.push(record);
    }
    Ok(out)
}

pub fn save_predictions(path: &Path, predictions: &[Prediction]) -> Result<(), JsonlError> {
    jsonl::write_records(path, predictions)
}
