//! DCT features for a background-subtracted, resampled sequence.
//!
//! The vector is the concatenation of two blocks:
//!
//! * temporal: for each pixel in row-major order, the magnitudes of the
//!   `temporal_k` lowest-frequency coefficients (DC first) of the 1-D DCT
//!   of that pixel's time series;
//! * spatial: for each frame in order, the magnitudes of the top-left
//!   `spatial_block × spatial_block` corner of the frame's 2-D DCT,
//!   row-major.
//!
//! All transforms are orthonormal DCT-II.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{Stage, ThermalFrame, ThermalSequence, GRID_SIDE, PIXELS};
use crate::preprocess::DEFAULT_TARGET_LEN;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("cannot keep {k} coefficients of a length-{len} series")]
    TooManyCoefficients { k: usize, len: usize },
    #[error("spatial block {0} must be between 1 and 8")]
    BadSpatialBlock(usize),
    #[error("temporal_k and sequence_len must be at least 1")]
    ZeroParameter,
    #[error("sequence has {found} frames, expected {expected}")]
    WrongLength { expected: usize, found: usize },
    #[error("sequence must be background-subtracted before feature extraction")]
    NotSubtracted,
}

/// Orthonormal DCT-II matrix: entry (u, t) = c(u)·cos(π(2t+1)u / 2n),
/// c(0) = √(1/n), c(u>0) = √(2/n). Row `u` is frequency `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct DctBasis {
    size: usize,
    matrix: Vec<f64>,
}

impl DctBasis {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "DCT size must be positive");
        let nf = n as f64;
        let mut matrix = Vec::with_capacity(n * n);
        for u in 0..n {
            let scale = if u == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            for t in 0..n {
                matrix.push(scale * (PI * (2 * t + 1) as f64 * u as f64 / (2.0 * nf)).cos());
            }
        }
        Self { size: n, matrix }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, u: usize, t: usize) -> f64 {
        self.matrix[u * self.size + t]
    }

    pub fn row(&self, u: usize) -> &[f64] {
        &self.matrix[u * self.size..(u + 1) * self.size]
    }

    /// First `k` coefficients of the transform of `signal`.
    pub fn forward_truncated(&self, signal: &[f64], k: usize) -> Vec<f64> {
        assert_eq!(signal.len(), self.size);
        (0..k.min(self.size))
            .map(|u| self.row(u).iter().zip(signal).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn forward(&self, signal: &[f64]) -> Vec<f64> {
        self.forward_truncated(signal, self.size)
    }

    /// Separable 2-D transform X·P·Xᵀ of a square row-major matrix.
    pub fn forward_2d(&self, data: &[f64]) -> Vec<f64> {
        let n = self.size;
        assert_eq!(data.len(), n * n);
        // rows: tmp = P·Xᵀ, tmp[r][v] = Σ_t P[r][t]·X[v][t]
        let mut tmp = vec![0.0; n * n];
        for r in 0..n {
            let prow = &data[r * n..(r + 1) * n];
            for v in 0..n {
                tmp[r * n + v] = self.row(v).iter().zip(prow).map(|(a, b)| a * b).sum();
            }
        }
        // columns: out[u][v] = Σ_r X[u][r]·tmp[r][v]
        let mut out = vec![0.0; n * n];
        for u in 0..n {
            let xrow = self.row(u);
            for v in 0..n {
                out[u * n + v] = (0..n).map(|r| xrow[r] * tmp[r * n + v]).sum();
            }
        }
        out
    }
}

pub fn dct_basis(n: usize) -> DctBasis {
    DctBasis::new(n)
}

/// Magnitudes of the `k` lowest-frequency DCT coefficients of a series.
pub fn temporal_feature(series: &[f64], k: usize) -> Result<Vec<f64>, FeatureError> {
    if k > series.len() {
        return Err(FeatureError::TooManyCoefficients {
            k,
            len: series.len(),
        });
    }
    let basis = DctBasis::new(series.len());
    Ok(abs_all(basis.forward_truncated(series, k)))
}

/// Magnitudes of the top-left `b×b` block of a frame's 2-D DCT, row-major.
pub fn spatial_feature(frame: &ThermalFrame, b: usize) -> Result<Vec<f64>, FeatureError> {
    if b == 0 || b > GRID_SIDE {
        return Err(FeatureError::BadSpatialBlock(b));
    }
    Ok(spatial_block(&DctBasis::new(GRID_SIDE), frame, b))
}

fn spatial_block(basis: &DctBasis, frame: &ThermalFrame, b: usize) -> Vec<f64> {
    let coeffs = basis.forward_2d(frame.pixels());
    let mut out = Vec::with_capacity(b * b);
    for u in 0..b {
        out.extend(coeffs[u * GRID_SIDE..u * GRID_SIDE + b].iter().map(|c| c.abs()));
    }
    out
}

fn abs_all(mut v: Vec<f64>) -> Vec<f64> {
    v.iter_mut().for_each(|x| *x = x.abs());
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    pub temporal_k: usize,
    pub spatial_block: usize,
    pub sequence_len: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            temporal_k: 5,
            spatial_block: 3,
            sequence_len: DEFAULT_TARGET_LEN,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.temporal_k == 0 || self.sequence_len == 0 {
            return Err(FeatureError::ZeroParameter);
        }
        if self.temporal_k > self.sequence_len {
            return Err(FeatureError::TooManyCoefficients {
                k: self.temporal_k,
                len: self.sequence_len,
            });
        }
        if self.spatial_block == 0 || self.spatial_block > GRID_SIDE {
            return Err(FeatureError::BadSpatialBlock(self.spatial_block));
        }
        Ok(())
    }

    pub fn temporal_len(&self) -> usize {
        PIXELS * self.temporal_k
    }

    pub fn spatial_len(&self) -> usize {
        self.spatial_block * self.spatial_block * self.sequence_len
    }

    pub fn dimension(&self) -> usize {
        self.temporal_len() + self.spatial_len()
    }
}

/// Concatenated temporal and spatial magnitudes for one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    temporal_len: usize,
}

impl FeatureVector {
    pub fn temporal(&self) -> &[f64] {
        &self.values[..self.temporal_len]
    }

    pub fn spatial(&self) -> &[f64] {
        &self.values[self.temporal_len..]
    }

    pub fn combined(&self) -> &[f64] {
        &self.values
    }

    pub fn into_combined(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Precomputed bases for one configuration.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    config: FeatureConfig,
    temporal: DctBasis,
    spatial: DctBasis,
}

impl FeatureExtractor {
    pub fn new(config: FeatureConfig) -> Result<Self, FeatureError> {
        config.validate()?;
        Ok(Self {
            config,
            temporal: DctBasis::new(config.sequence_len),
            spatial: DctBasis::new(GRID_SIDE),
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn extract(&self, seq: &ThermalSequence) -> Result<FeatureVector, FeatureError> {
        if seq.stage() != Stage::Subtracted {
            return Err(FeatureError::NotSubtracted);
        }
        let cfg = &self.config;
        if seq.len() != cfg.sequence_len {
            return Err(FeatureError::WrongLength {
                expected: cfg.sequence_len,
                found: seq.len(),
            });
        }
        let mut values = Vec::with_capacity(cfg.dimension());
        for pixel in 0..PIXELS {
            let series = seq.pixel_series(pixel);
            values.extend(abs_all(self.temporal.forward_truncated(&series, cfg.temporal_k)));
        }
        for frame in seq.frames() {
            values.extend(spatial_block(&self.spatial, frame, cfg.spatial_block));
        }
        Ok(FeatureVector {
            values,
            temporal_len: cfg.temporal_len(),
        })
    }
}

pub fn extract_features(
    seq: &ThermalSequence,
    cfg: &FeatureConfig,
) -> Result<FeatureVector, FeatureError> {
    FeatureExtractor::new(*cfg)?.extract(seq)
}
