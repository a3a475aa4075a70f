//! Background estimation, background subtraction, and equal-interval
//! resampling to a common frame count.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{Stage, ThermalSequence, PIXELS, RAW_MAX_C, RAW_MIN_C};

/// Frame count every sequence is resampled to unless configured otherwise.
pub const DEFAULT_TARGET_LEN: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("background must be estimated from a raw sequence")]
    SubtractedBackgroundClip,
    #[error("background clip has no frames")]
    EmptyBackgroundClip,
    #[error("sequence is already background-subtracted")]
    AlreadySubtracted,
    #[error("target length must be at least 1")]
    ZeroTargetLength,
    #[error("background pixel {index} is {value}, outside [0, 80] °C")]
    BackgroundOutOfRange { index: usize, value: f64 },
}

/// Per-pixel mean temperature of an empty scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundModel {
    mean_pixels: Vec<f64>,
    source_frame_count: usize,
}

impl BackgroundModel {
    pub fn new(mean_pixels: [f64; PIXELS], source_frame_count: usize) -> Result<Self, PreprocessError> {
        if source_frame_count == 0 {
            return Err(PreprocessError::EmptyBackgroundClip);
        }
        if let Some((index, &value)) = mean_pixels
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && (RAW_MIN_C..=RAW_MAX_C).contains(*v)))
        {
            return Err(PreprocessError::BackgroundOutOfRange { index, value });
        }
        Ok(Self {
            mean_pixels: mean_pixels.to_vec(),
            source_frame_count,
        })
    }

    pub fn mean_pixels(&self) -> &[f64] {
        &self.mean_pixels
    }

    pub fn source_frame_count(&self) -> usize {
        self.source_frame_count
    }
}

/// Averages each pixel over every frame of an empty-scene clip.
pub fn estimate_background(empty_scene: &ThermalSequence) -> Result<BackgroundModel, PreprocessError> {
    if empty_scene.stage() != Stage::Raw {
        return Err(PreprocessError::SubtractedBackgroundClip);
    }
    let frames = empty_scene.frames();
    if frames.is_empty() {
        return Err(PreprocessError::EmptyBackgroundClip);
    }
    let mut sums = [0.0; PIXELS];
    for frame in frames {
        for (s, p) in sums.iter_mut().zip(frame.pixels()) {
            *s += p;
        }
    }
    let n = frames.len() as f64;
    BackgroundModel::new(sums.map(|s| s / n), frames.len())
}

pub fn subtract_background(
    seq: &ThermalSequence,
    bg: &BackgroundModel,
) -> Result<ThermalSequence, PreprocessError> {
    if seq.stage() != Stage::Raw {
        return Err(PreprocessError::AlreadySubtracted);
    }
    let mean = bg.mean_pixels();
    let frames = seq
        .frames()
        .iter()
        .map(|f| f.map_pixels(|i, p| p - mean[i]))
        .collect();
    Ok(seq.with_frames(frames, Stage::Subtracted))
}

/// Adds the background back onto a subtracted sequence.
pub fn restore_background(seq: &ThermalSequence, bg: &BackgroundModel) -> ThermalSequence {
    let mean = bg.mean_pixels();
    let frames = seq
        .frames()
        .iter()
        .map(|f| f.map_pixels(|i, p| p + mean[i]))
        .collect();
    seq.with_frames(frames, Stage::Raw)
}

/// Source frame index for output position `j` when mapping `input_len`
/// frames onto `target_len`: `round(j·(L−1)/(T−1))` with ties rounded up,
/// evaluated in integer arithmetic.
pub fn resample_index(j: usize, input_len: usize, target_len: usize) -> usize {
    if target_len <= 1 || input_len <= 1 {
        return 0;
    }
    let num = 2 * j * (input_len - 1) + (target_len - 1);
    num / (2 * (target_len - 1))
}

/// Picks `target_len` frames at equal intervals. Frames are selected,
/// never interpolated; upsampling repeats frames.
pub fn resample_equal_interval(
    seq: &ThermalSequence,
    target_len: usize,
) -> Result<ThermalSequence, PreprocessError> {
    if target_len == 0 {
        return Err(PreprocessError::ZeroTargetLength);
    }
    let input = seq.frames();
    let frames = (0..target_len)
        .map(|j| input[resample_index(j, input.len(), target_len)].clone())
        .collect();
    Ok(seq.with_frames(frames, seq.stage()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{ActivityLabel, ThermalFrame};

    fn seq_of(values: &[f64]) -> ThermalSequence {
        let frames = values
            .iter()
            .enumerate()
            .map(|(i, &v)| ThermalFrame::filled(v, i as u64 * 100).unwrap())
            .collect();
        ThermalSequence::new(frames, ActivityLabel::new("walk_left_right"), "s1", "r0", Stage::Raw)
            .unwrap()
    }

    #[test]
    fn constant_background() {
        let bg = estimate_background(&seq_of(&[21.0; 5])).unwrap();
        assert!(bg.mean_pixels().iter().all(|&m| m == 21.0));
        assert_eq!(bg.source_frame_count(), 5);
    }

    #[test]
    fn alternating_background_averages_to_midpoint() {
        let bg = estimate_background(&seq_of(&[20.0, 22.0, 20.0, 22.0])).unwrap();
        assert!(bg.mean_pixels().iter().all(|&m| m == 21.0));
    }

    #[test]
    fn single_frame_background_is_that_frame() {
        let bg = estimate_background(&seq_of(&[23.5])).unwrap();
        assert!(bg.mean_pixels().iter().all(|&m| m == 23.5));
    }

    #[test]
    fn subtraction() {
        let bg = estimate_background(&seq_of(&[21.0; 3])).unwrap();
        let out = subtract_background(&seq_of(&[25.0; 4]), &bg).unwrap();
        assert_eq!(out.stage(), Stage::Subtracted);
        assert!(out.frames().iter().all(|f| f.pixels().iter().all(|&p| p == 4.0)));
        assert_eq!(out.subject_id(), "s1");
        assert_eq!(out.label().as_str(), "walk_left_right");

        let same = subtract_background(&seq_of(&[21.0; 2]), &bg).unwrap();
        assert!(same.frames().iter().all(|f| f.pixels().iter().all(|&p| p == 0.0)));
    }

    #[test]
    fn stage_errors() {
        let bg = estimate_background(&seq_of(&[21.0; 3])).unwrap();
        let once = subtract_background(&seq_of(&[25.0; 2]), &bg).unwrap();
        assert_eq!(
            subtract_background(&once, &bg),
            Err(PreprocessError::AlreadySubtracted)
        );
        assert_eq!(
            estimate_background(&once),
            Err(PreprocessError::SubtractedBackgroundClip)
        );
    }

    #[test]
    fn resample_identity_and_endpoints() {
        let values: Vec<f64> = (0..20).map(|i| 20.0 + i as f64).collect();
        let s = seq_of(&values);
        assert_eq!(resample_equal_interval(&s, 20).unwrap(), s);

        let abc = seq_of(&[1.0, 2.0, 3.0]);
        let out = resample_equal_interval(&abc, 2).unwrap();
        assert_eq!(out.frames(), &[abc.frames()[0].clone(), abc.frames()[2].clone()]);

        let one = resample_equal_interval(&abc, 1).unwrap();
        assert_eq!(one.frames(), &abc.frames()[..1]);
        assert_eq!(
            resample_equal_interval(&abc, 0),
            Err(PreprocessError::ZeroTargetLength)
        );
    }

    #[test]
    fn resample_100_to_20_matches_enumerated_formula() {
        // Independent enumeration using floating point and explicit half-up.
        let expected: Vec<usize> = (0..20)
            .map(|j| {
                let x = j as f64 * 99.0 / 19.0;
                (x + 0.5).floor() as usize
            })
            .collect();
        let got: Vec<usize> = (0..20).map(|j| resample_index(j, 100, 20)).collect();
        assert_eq!(got, expected);
        assert_eq!(got[..3], [0, 5, 10]);
        assert_eq!(got[19], 99);
    }

    #[test]
    fn half_ties_round_up() {
        // L = 4, T = 3: j = 1 maps to 1.5 -> 2.
        assert_eq!(resample_index(1, 4, 3), 2);
        // L = 2, T = 3: j = 1 maps to 0.5 -> 1.
        assert_eq!(resample_index(1, 2, 3), 1);
    }

    #[test]
    fn upsampling_repeats_frames() {
        let s = seq_of(&[20.0, 30.0]);
        let out = resample_equal_interval(&s, 5).unwrap();
        let firsts: Vec<f64> = out.frames().iter().map(|f| f.pixels()[0]).collect();
        assert_eq!(firsts, vec![20.0, 20.0, 30.0, 30.0, 30.0]);
    }
}
