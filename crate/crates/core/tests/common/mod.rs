//! Shared oracles and fixtures for the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::Path;

use thermact::frame::{ActivityLabel, Stage, ThermalFrame, ThermalSequence, PIXELS};
use thermact::synthgen::{generate_corpus, Corpus, CorpusConfig};

/// Orthonormal DCT-II straight from the definition sum.
pub fn naive_dct(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    (0..x.len())
        .map(|u| {
            let c = if u == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            c * x
                .iter()
                .enumerate()
                .map(|(t, v)| v * (PI * (2 * t + 1) as f64 * u as f64 / (2.0 * n)).cos())
                .sum::<f64>()
        })
        .collect()
}

/// 2-D orthonormal DCT-II of an 8×8 row-major frame by the O(n⁴) double sum.
pub fn naive_dct_2d(p: &[f64]) -> Vec<f64> {
    let n = 8usize;
    let c = |u: usize| if u == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
    let mut out = vec![0.0; n * n];
    for u in 0..n {
        for v in 0..n {
            let mut s = 0.0;
            for r in 0..n {
                for col in 0..n {
                    s += p[r * n + col]
                        * (PI * (2 * r + 1) as f64 * u as f64 / (2.0 * n as f64)).cos()
                        * (PI * (2 * col + 1) as f64 * v as f64 / (2.0 * n as f64)).cos();
                }
            }
            out[u * n + v] = c(u) * c(v) * s;
        }
    }
    out
}

/// Feature vector computed without the library's feature code: per-pixel
/// naive 1-D DCT magnitudes, then per-frame naive 2-D DCT block magnitudes.
pub fn naive_features(seq: &ThermalSequence, k: usize, b: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for p in 0..PIXELS {
        let series: Vec<f64> = seq.frames().iter().map(|f| f.pixels()[p]).collect();
        out.extend(naive_dct(&series).into_iter().take(k).map(f64::abs));
    }
    for f in seq.frames() {
        let d = naive_dct_2d(f.pixels());
        for u in 0..b {
            for v in 0..b {
                out.push(d[u * 8 + v].abs());
            }
        }
    }
    out
}

pub fn subtracted(frames: Vec<[f64; PIXELS]>) -> ThermalSequence {
    let frames = frames
        .into_iter()
        .enumerate()
        .map(|(i, p)| ThermalFrame::new(p, i as u64 * 100).unwrap())
        .collect();
    ThermalSequence::new(frames, ActivityLabel::new("x"), "s", "r", Stage::Subtracted).unwrap()
}

pub fn write_corpus(cfg: &CorpusConfig, dir: &Path) -> Corpus {
    let corpus = generate_corpus(cfg).unwrap();
    corpus.write_to(dir).unwrap();
    corpus
}
