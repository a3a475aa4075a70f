//! Cross-validation harnesses and the metrics reported for them.
//!
//! Every fold trains on its own training indices only (standardization
//! included) and predicts its test indices. Predictions from all folds are
//! pooled into one confusion matrix.

mod metrics;
mod split;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metrics::{fall_metrics, percent, ConfusionMatrix, FallMetrics};
pub use split::{loso_split, stratified_kfold_split, Fold};

use crate::classifier::{train_indexed, SvmConfig, SvmError, SvmModel};
use crate::features::FeatureConfig;
use crate::frame::{ActivityLabel, FALL_LABEL};
use crate::manifest::Dataset;
use crate::pipeline::{featurize_dataset, PipelineError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("leave-one-subject-out needs at least 2 subjects, found {0}")]
    TooFewSubjects(usize),
    #[error("k-fold needs k >= 2, got {0}")]
    BadFoldCount(usize),
    #[error("class {class} has {count} examples, fewer than k = {k}")]
    ClassTooSmall { class: String, count: usize, k: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("label {0} is not in the label set")]
    UnknownLabel(String),
    #[error("fold {fold}: {source}")]
    Fold { fold: usize, source: SvmError },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Which splitter drives the evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "protocol")]
pub enum Protocol {
    Loso,
    Kfold { k: usize, seed: u64 },
}

impl Protocol {
    pub fn folds<S: AsRef<str>, L: AsRef<str>>(
        &self,
        subjects: &[S],
        labels: &[L],
    ) -> Result<Vec<Fold>, EvalError> {
        match *self {
            Protocol::Loso => loso_split(subjects),
            Protocol::Kfold { k, seed } => stratified_kfold_split(labels, k, seed),
        }
    }
}

/// A training procedure evaluated fold by fold.
pub trait FoldLearner: Sync {
    type Model: Send;

    fn fit(&self, x: &[Vec<f64>], y: &[usize], classes: &[ActivityLabel]) -> Result<Self::Model, SvmError>;

    fn predict(&self, model: &Self::Model, x: &[f64]) -> Result<usize, SvmError>;
}

pub struct SvmLearner(pub SvmConfig);

impl FoldLearner for SvmLearner {
    type Model = SvmModel;

    fn fit(&self, x: &[Vec<f64>], y: &[usize], classes: &[ActivityLabel]) -> Result<SvmModel, SvmError> {
        train_indexed(x, y, classes, &self.0)
    }

    fn predict(&self, model: &SvmModel, x: &[f64]) -> Result<usize, SvmError> {
        Ok(model.predict(x)?.class_index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub index: usize,
    pub source: String,
    pub subject: String,
    pub true_label: String,
    pub predicted_label: String,
    pub fold: usize,
}

/// Tool version and configuration attached by front ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub config_hash: String,
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub overall_accuracy: f64,
    pub per_class_accuracy: Vec<Option<f64>>,
    pub fall_sensitivity: Option<f64>,
    pub fall_specificity: Option<f64>,
    pub fold_assignments: Vec<usize>,
    pub per_fold_accuracy: Vec<Option<f64>>,
    pub predictions: Vec<PredictionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl EvalReport {
    /// Short human summary with percentages to two decimals.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "overall accuracy: {}\nfall sensitivity: {}\nfall specificity: {}\n",
            percent(Some(self.overall_accuracy)),
            percent(self.fall_sensitivity),
            percent(self.fall_specificity)
        );
        for (i, acc) in self.per_fold_accuracy.iter().enumerate() {
            s.push_str(&format!("fold {i}: {}\n", percent(*acc)));
        }
        s
    }
}

/// Result of a cross-validation run, with the model of every fold.
pub struct CvRun<M> {
    pub report: EvalReport,
    pub models: Vec<M>,
}

/// A fold's model and its `(sample, predicted class)` pairs.
type FoldOutcome<M> = Result<(M, Vec<(usize, usize)>), EvalError>;

/// Runs `learner` over `folds` on precomputed feature rows.
///
/// `sources` and `subjects` label the per-sequence prediction log.
pub fn cross_validate<L: FoldLearner>(
    x: &[Vec<f64>],
    y: &[usize],
    classes: &[ActivityLabel],
    sources: &[String],
    subjects: &[String],
    folds: &[Fold],
    learner: &L,
) -> Result<CvRun<L::Model>, EvalError> {
    if x.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let outcomes: Vec<FoldOutcome<L::Model>> = folds
        .par_iter()
        .enumerate()
        .map(|(fold_id, fold)| {
            let wrap = |source| EvalError::Fold { fold: fold_id, source };
            let train_x: Vec<Vec<f64>> = fold.train.iter().map(|&i| x[i].clone()).collect();
            let train_y: Vec<usize> = fold.train.iter().map(|&i| y[i]).collect();
            let model = learner.fit(&train_x, &train_y, classes).map_err(wrap)?;
            let preds = fold
                .test
                .iter()
                .map(|&i| learner.predict(&model, &x[i]).map(|p| (i, p)))
                .collect::<Result<Vec<_>, _>>()
                .map_err(wrap)?;
            Ok((model, preds))
        })
        .collect();
    // First failing fold in fold order, independent of scheduling.
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;

    let names: Vec<String> = classes.iter().map(|c| c.to_string()).collect();
    let mut confusion = ConfusionMatrix::new(names.clone());
    let mut fold_assignments = vec![usize::MAX; x.len()];
    let mut predictions = Vec::with_capacity(x.len());
    let mut per_fold_accuracy = Vec::with_capacity(folds.len());
    let mut models = Vec::with_capacity(folds.len());
    for (fold_id, (model, preds)) in outcomes.into_iter().enumerate() {
        let correct = preds.iter().filter(|&&(i, p)| y[i] == p).count();
        per_fold_accuracy.push((!preds.is_empty()).then(|| correct as f64 / preds.len() as f64));
        for (i, p) in preds {
            confusion.record(y[i], p);
            fold_assignments[i] = fold_id;
            predictions.push(PredictionRecord {
                index: i,
                source: sources[i].clone(),
                subject: subjects[i].clone(),
                true_label: names[y[i]].clone(),
                predicted_label: names[p].clone(),
                fold: fold_id,
            });
        }
        models.push(model);
    }
    predictions.sort_by_key(|r| r.index);
    let fall = if confusion.index_of(FALL_LABEL).is_some() {
        fall_metrics(&confusion, FALL_LABEL)?
    } else {
        FallMetrics {
            sensitivity: None,
            specificity: None,
        }
    };
    let report = EvalReport {
        overall_accuracy: confusion.overall_accuracy().unwrap_or(0.0),
        per_class_accuracy: confusion.per_class_accuracy(),
        fall_sensitivity: fall.sensitivity,
        fall_specificity: fall.specificity,
        confusion,
        fold_assignments,
        per_fold_accuracy,
        predictions,
        provenance: None,
    };
    Ok(CvRun { report, models })
}

/// Full pipeline evaluation: background subtraction, resampling, DCT
/// features, then per-fold SVM training and prediction.
pub fn run_pipeline_cv(
    dataset: &Dataset,
    protocol: &Protocol,
    target_len: usize,
    features: &FeatureConfig,
    svm: &SvmConfig,
) -> Result<CvRun<SvmModel>, EvalError> {
    if dataset.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let x = featurize_dataset(dataset, target_len, features)?;
    let y = dataset.class_indices();
    let subjects = dataset.subjects();
    let labels: Vec<&str> = dataset
        .samples
        .iter()
        .map(|s| s.sequence.label().as_str())
        .collect();
    let folds = protocol.folds(&subjects, &labels)?;
    let sources: Vec<String> = dataset
        .samples
        .iter()
        .map(|s| s.path.display().to_string())
        .collect();
    cross_validate(
        &x,
        &y,
        &dataset.label_set,
        &sources,
        &subjects,
        &folds,
        &SvmLearner(*svm),
    )
}
