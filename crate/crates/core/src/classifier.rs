//! One-vs-rest linear SVM with train-time z-score standardization.
//!
//! Each class gets a binary L2-regularized hinge-loss classifier trained
//! by full-batch subgradient descent on
//!
//! ```text
//! λ/2·(‖w‖² + b²) + (1/m)·Σ max(0, 1 − yᵢ(w·zᵢ + b)),   λ = 1/(C·m)
//! ```
//!
//! with step `1/(λ·t)` at epoch `t`, each step projected back onto the
//! ball of radius `1/√λ`. Training stops after `max_epochs` or once the
//! objective changes by at most `tolerance` (relative) between epochs; the
//! iterate with the lowest objective is kept. Standardization statistics are part of the model, so
//! prediction takes raw feature vectors.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::ActivityLabel;

pub const MODEL_FORMAT_VERSION: u32 = 1;
/// Standard deviations below this are treated as zero variance.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("training set is empty")]
    Empty,
    #[error("training needs at least 2 distinct classes, found {0}")]
    SingleClass(usize),
    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{features} feature vectors but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("class {0} has no training examples")]
    MissingClass(String),
    #[error("label {0} is not one of the model classes")]
    UnknownLabel(String),
    #[error("invalid SVM configuration: {0}")]
    Config(String),
    #[error("model file {path}: unsupported format version {found:?} (expected {MODEL_FORMAT_VERSION})")]
    Version { path: PathBuf, found: Option<u64> },
    #[error("model file {path} is corrupt: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("cannot access model file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmConfig {
    pub regularization_c: f64,
    pub max_epochs: usize,
    pub tolerance: f64,
    /// Kept for provenance; full-batch training has no random component.
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            regularization_c: 1.0,
            max_epochs: 200,
            tolerance: 1e-4,
            seed: 42,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<(), SvmError> {
        if !(self.regularization_c.is_finite() && self.regularization_c > 0.0) {
            return Err(SvmError::Config("regularization_c must be positive".into()));
        }
        if self.max_epochs == 0 {
            return Err(SvmError::Config("max_epochs must be positive".into()));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(SvmError::Config("tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Per-dimension z-score statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation; near-constant dimensions
    /// get a unit std so they pass through centered.
    pub fn fit(rows: &[&[f64]]) -> Self {
        let dim = rows[0].len();
        let m = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for row in rows {
            for (acc, v) in mean.iter_mut().zip(row.iter()) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= m);
        let mut var = vec![0.0; dim];
        for row in rows {
            for ((acc, v), mu) in var.iter_mut().zip(row.iter()).zip(&mean) {
                *acc += (v - mu) * (v - mu);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / m).sqrt();
                if sd < STD_FLOOR {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, mu), sd)| (v - mu) / sd)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    classes: Vec<ActivityLabel>,
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
    scaler: Standardizer,
    train_config: SvmConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class_index: usize,
    pub label: ActivityLabel,
    pub scores: Vec<f64>,
}

/// Trains on raw feature rows. `classes` fixes the class order of the
/// model; every class needs at least one example.
pub fn train(
    features: &[Vec<f64>],
    labels: &[ActivityLabel],
    classes: &[ActivityLabel],
    cfg: &SvmConfig,
) -> Result<SvmModel, SvmError> {
    if features.len() != labels.len() {
        return Err(SvmError::LengthMismatch {
            features: features.len(),
            labels: labels.len(),
        });
    }
    let targets = labels
        .iter()
        .map(|l| {
            classes
                .iter()
                .position(|c| c == l)
                .ok_or_else(|| SvmError::UnknownLabel(l.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    train_indexed(features, &targets, classes, cfg)
}

/// Same as [`train`] with labels given as indices into `classes`.
pub fn train_indexed(
    features: &[Vec<f64>],
    targets: &[usize],
    classes: &[ActivityLabel],
    cfg: &SvmConfig,
) -> Result<SvmModel, SvmError> {
    cfg.validate()?;
    if features.is_empty() {
        return Err(SvmError::Empty);
    }
    if features.len() != targets.len() {
        return Err(SvmError::LengthMismatch {
            features: features.len(),
            labels: targets.len(),
        });
    }
    if classes.len() < 2 {
        return Err(SvmError::SingleClass(classes.len()));
    }
    let dim = features[0].len();
    if let Some(bad) = features.iter().find(|f| f.len() != dim) {
        return Err(SvmError::DimensionMismatch {
            expected: dim,
            found: bad.len(),
        });
    }
    let mut counts = vec![0usize; classes.len()];
    for &t in targets {
        match counts.get_mut(t) {
            Some(c) => *c += 1,
            None => return Err(SvmError::UnknownLabel(format!("class index {t}"))),
        }
    }
    let present = counts.iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(SvmError::SingleClass(present));
    }
    if let Some(i) = counts.iter().position(|&c| c == 0) {
        return Err(SvmError::MissingClass(classes[i].to_string()));
    }

    let rows: Vec<&[f64]> = features.iter().map(Vec::as_slice).collect();
    let scaler = Standardizer::fit(&rows);
    let z: Vec<Vec<f64>> = features.iter().map(|x| scaler.transform(x)).collect();

    let mut weights = Vec::with_capacity(classes.len());
    let mut biases = Vec::with_capacity(classes.len());
    for c in 0..classes.len() {
        let y: Vec<f64> = targets
            .iter()
            .map(|&t| if t == c { 1.0 } else { -1.0 })
            .collect();
        let (w, b) = train_binary(&z, &y, cfg);
        weights.push(w);
        biases.push(b);
    }
    Ok(SvmModel {
        classes: classes.to_vec(),
        weights,
        biases,
        scaler,
        train_config: *cfg,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Hinge objective of a binary problem, given precomputed margins yᵢ·fᵢ.
fn objective(lambda: f64, w: &[f64], b: f64, margins: &[f64]) -> f64 {
    let m = margins.len() as f64;
    let hinge: f64 = margins.iter().map(|&g| (1.0 - g).max(0.0)).sum();
    0.5 * lambda * (dot(w, w) + b * b) + hinge / m
}

fn train_binary(z: &[Vec<f64>], y: &[f64], cfg: &SvmConfig) -> (Vec<f64>, f64) {
    let m = z.len();
    let dim = z[0].len();
    let lambda = 1.0 / (cfg.regularization_c * m as f64);
    let radius = 1.0 / lambda.sqrt();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut best = (w.clone(), b, f64::INFINITY);
    let mut margins = vec![0.0; m];
    let mut grad = vec![0.0; dim];
    let mut prev = f64::INFINITY;

    for t in 1..=cfg.max_epochs + 1 {
        for ((g, zi), yi) in margins.iter_mut().zip(z).zip(y) {
            *g = yi * (dot(&w, zi) + b);
        }
        let obj = objective(lambda, &w, b, &margins);
        if obj < best.2 {
            best = (w.clone(), b, obj);
        }
        if t > cfg.max_epochs || (prev.is_finite() && (prev - obj).abs() <= cfg.tolerance * prev) {
            break;
        }
        prev = obj;

        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for ((g, zi), yi) in margins.iter().zip(z).zip(y) {
            if *g < 1.0 {
                for (acc, v) in grad.iter_mut().zip(zi) {
                    *acc += yi * v;
                }
                grad_b += yi;
            }
        }
        let eta = 1.0 / (lambda * t as f64);
        let shrink = 1.0 - eta * lambda;
        let step = eta / m as f64;
        for (wj, gj) in w.iter_mut().zip(&grad) {
            *wj = shrink * *wj + step * gj;
        }
        b = shrink * b + step * grad_b;

        // The optimum lies inside this ball.
        let norm = (dot(&w, &w) + b * b).sqrt();
        if norm > radius {
            let s = radius / norm;
            w.iter_mut().for_each(|v| *v *= s);
            b *= s;
        }
    }
    (best.0, best.1)
}

impl SvmModel {
    pub fn classes(&self) -> &[ActivityLabel] {
        &self.classes
    }

    pub fn dimension(&self) -> usize {
        self.scaler.mean.len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn scaler(&self) -> &Standardizer {
        &self.scaler
    }

    pub fn train_config(&self) -> &SvmConfig {
        &self.train_config
    }

    /// Scores of an already standardized vector.
    pub fn scores_standardized(&self, z: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| dot(w, z) + b)
            .collect()
    }

    pub fn decision_scores(&self, feature: &[f64]) -> Result<Vec<f64>, SvmError> {
        if feature.len() != self.dimension() {
            return Err(SvmError::DimensionMismatch {
                expected: self.dimension(),
                found: feature.len(),
            });
        }
        Ok(self.scores_standardized(&self.scaler.transform(feature)))
    }

    /// Argmax class; ties go to the lowest class index.
    pub fn predict(&self, feature: &[f64]) -> Result<Prediction, SvmError> {
        let scores = self.decision_scores(feature)?;
        let class_index = argmax(&scores);
        Ok(Prediction {
            class_index,
            label: self.classes[class_index].clone(),
            scores,
        })
    }

    pub fn predict_batch(&self, features: &[Vec<f64>]) -> Result<Vec<Prediction>, SvmError> {
        features.iter().map(|f| self.predict(f)).collect()
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            version: MODEL_FORMAT_VERSION,
            classes: self.classes.clone(),
            weights: self.weights.clone(),
            biases: self.biases.clone(),
            scaler_mean: self.scaler.mean.clone(),
            scaler_std: self.scaler.std.clone(),
            config: self.train_config,
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    /// Parses a model from a JSON value. Unknown top-level keys are
    /// ignored so wrappers can attach metadata.
    pub fn from_json_value(value: serde_json::Value, path: &Path) -> Result<Self, SvmError> {
        let corrupt = |reason: String| SvmError::Corrupt {
            path: path.to_path_buf(),
            reason,
        };
        let version = value.get("version").and_then(serde_json::Value::as_u64);
        if version != Some(MODEL_FORMAT_VERSION as u64) {
            return Err(SvmError::Version {
                path: path.to_path_buf(),
                found: version,
            });
        }
        let file: ModelFile =
            serde_json::from_value(value).map_err(|e| corrupt(e.to_string()))?;
        let c = file.classes.len();
        let d = file.scaler_mean.len();
        if c < 2 || file.weights.len() != c || file.biases.len() != c {
            return Err(corrupt("class, weight, and bias counts disagree".into()));
        }
        if file.scaler_std.len() != d || file.weights.iter().any(|w| w.len() != d) {
            return Err(corrupt("vector dimensions disagree".into()));
        }
        let all_finite = file
            .weights
            .iter()
            .flatten()
            .chain(&file.biases)
            .chain(&file.scaler_mean)
            .all(|v| v.is_finite());
        if !all_finite || file.scaler_std.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(corrupt("non-finite or non-positive parameters".into()));
        }
        Ok(Self {
            classes: file.classes,
            weights: file.weights,
            biases: file.biases,
            scaler: Standardizer {
                mean: file.scaler_mean,
                std: file.scaler_std,
            },
            train_config: file.config,
        })
    }
}

pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    classes: Vec<ActivityLabel>,
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
    scaler_mean: Vec<f64>,
    scaler_std: Vec<f64>,
    config: SvmConfig,
}

pub fn save_model(model: &SvmModel, path: impl AsRef<Path>) -> Result<(), SvmError> {
    let path = path.as_ref();
    fs::write(path, model.to_json()).map_err(|source| SvmError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SvmModel, SvmError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| SvmError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| SvmError::Corrupt {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    SvmModel::from_json_value(value, path)
}
