//! Raw sequence to feature vector: subtract background, resample, extract.

use rayon::prelude::*;
use thiserror::Error;

use crate::features::{FeatureConfig, FeatureError, FeatureExtractor, FeatureVector};
use crate::frame::ThermalSequence;
use crate::manifest::Dataset;
use crate::preprocess::{resample_equal_interval, subtract_background, BackgroundModel, PreprocessError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{source_name}: {error}")]
    Preprocess {
        source_name: String,
        error: PreprocessError,
    },
    #[error("{source_name}: {error}")]
    Features {
        source_name: String,
        error: FeatureError,
    },
    #[error("feature config sequence_len {features} differs from target_len {target}")]
    LengthConfig { features: usize, target: usize },
}

pub fn featurize_sequence(
    raw: &ThermalSequence,
    background: &BackgroundModel,
    target_len: usize,
    extractor: &FeatureExtractor,
) -> Result<FeatureVector, PipelineError> {
    let pre = |error| PipelineError::Preprocess {
        source_name: format!("{}/{}", raw.subject_id(), raw.session_id()),
        error,
    };
    let subtracted = subtract_background(raw, background).map_err(pre)?;
    let resampled = resample_equal_interval(&subtracted, target_len).map_err(pre)?;
    extractor
        .extract(&resampled)
        .map_err(|error| PipelineError::Features {
            source_name: format!("{}/{}", raw.subject_id(), raw.session_id()),
            error,
        })
}

/// Feature rows for every sample, in dataset order.
pub fn featurize_dataset(
    dataset: &Dataset,
    target_len: usize,
    cfg: &FeatureConfig,
) -> Result<Vec<Vec<f64>>, PipelineError> {
    if cfg.sequence_len != target_len {
        return Err(PipelineError::LengthConfig {
            features: cfg.sequence_len,
            target: target_len,
        });
    }
    let extractor = FeatureExtractor::new(*cfg).map_err(|error| PipelineError::Features {
        source_name: "config".to_string(),
        error,
    })?;
    dataset
        .samples
        .par_iter()
        .map(|s| {
            featurize_sequence(&s.sequence, &s.background, target_len, &extractor)
                .map(FeatureVector::into_combined)
                .map_err(|e| match e {
                    PipelineError::Preprocess { error, .. } => PipelineError::Preprocess {
                        source_name: s.path.display().to_string(),
                        error,
                    },
                    PipelineError::Features { error, .. } => PipelineError::Features {
                        source_name: s.path.display().to_string(),
                        error,
                    },
                    other => other,
                })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}
