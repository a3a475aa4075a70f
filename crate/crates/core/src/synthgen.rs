//! Synthetic overhead-sensor corpora: a Gaussian heat blob moving over a
//! noisy ambient field, scripted per activity.
//!
//! A frame at normalized time `s ∈ [0, 1]` is
//!
//! ```text
//! ambient_mean + offset[p] + A(s)·exp(−(dx²/2σx(s)² + dy²/2σy(s)²)) + N(0, noise_std²)
//! ```
//!
//! sampled at pixel centres (column `c` is `x = c`, row `r` is `y = r`),
//! then quantized and clamped to the sensor range.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{
    adl_label_set, ActivityLabel, Stage, ThermalFrame, ThermalSequence, ADL_LABELS, GRID_SIDE,
    PIXELS, RAW_MAX_C, RAW_MIN_C,
};
use crate::manifest::{DatasetManifest, ManifestEntry};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("blob sigma must be positive, got {0}")]
    DegenerateSigma(f64),
    #[error("invalid scene: {0}")]
    Scene(String),
    #[error("invalid script: {0}")]
    Script(String),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: io::Error },
}

const DEFAULT_OFFSET_SEED: u64 = 0x0ff5_e75e_ed00;
/// Largest magnitude of the fixed per-pixel ambient pattern.
pub const OFFSET_SPAN_C: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneParams {
    pub ambient_mean: f64,
    pub ambient_pixel_offsets: Vec<f64>,
    pub noise_std: f64,
    pub frame_rate_hz: f64,
    /// 0 disables quantization.
    pub quantize_step: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self::with_offset_seed(DEFAULT_OFFSET_SEED)
    }
}

impl SceneParams {
    /// Default scene whose fixed-pattern offsets are drawn uniformly from
    /// ±0.5 °C with the given seed.
    pub fn with_offset_seed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            ambient_mean: 21.0,
            ambient_pixel_offsets: (0..PIXELS)
                .map(|_| rng.random_range(-OFFSET_SPAN_C..=OFFSET_SPAN_C))
                .collect(),
            noise_std: 0.25,
            frame_rate_hz: 10.0,
            quantize_step: 0.25,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.ambient_pixel_offsets.len() != PIXELS {
            return Err(SynthError::Scene(format!(
                "expected 64 ambient offsets, found {}",
                self.ambient_pixel_offsets.len()
            )));
        }
        if !(self.noise_std.is_finite() && self.noise_std > 0.0) {
            return Err(SynthError::Scene("noise_std must be positive".into()));
        }
        if !(self.frame_rate_hz.is_finite() && self.frame_rate_hz > 0.0) {
            return Err(SynthError::Scene("frame_rate_hz must be positive".into()));
        }
        if !(self.quantize_step.is_finite() && self.quantize_step >= 0.0) {
            return Err(SynthError::Scene("quantize_step must be non-negative".into()));
        }
        if !(RAW_MIN_C..=RAW_MAX_C).contains(&self.ambient_mean) {
            return Err(SynthError::Scene("ambient_mean outside [0, 80] °C".into()));
        }
        if self.ambient_pixel_offsets.iter().any(|o| !o.is_finite()) {
            return Err(SynthError::Scene("ambient offsets must be finite".into()));
        }
        Ok(())
    }

    /// Noise-free empty-scene temperature of every pixel.
    pub fn ambient_field(&self) -> Vec<f64> {
        self.ambient_pixel_offsets
            .iter()
            .map(|o| self.ambient_mean + o)
            .collect()
    }
}

/// Blob state at a normalized time within the script.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobKey {
    /// Position in [0, 1] along the script's duration.
    pub at: f64,
    pub x: f64,
    pub y: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    /// °C above ambient at the blob centre.
    pub amplitude: f64,
}

impl BlobKey {
    fn lerp(&self, other: &BlobKey, s: f64) -> BlobKey {
        let l = |a: f64, b: f64| a + (b - a) * s;
        BlobKey {
            at: l(self.at, other.at),
            x: l(self.x, other.x),
            y: l(self.y, other.y),
            sigma_x: l(self.sigma_x, other.sigma_x),
            sigma_y: l(self.sigma_y, other.sigma_y),
            amplitude: l(self.amplitude, other.amplitude),
        }
    }

    /// Blob temperature rise at a pixel centre.
    pub fn value_at(&self, col: f64, row: f64) -> f64 {
        let dx = col - self.x;
        let dy = row - self.y;
        self.amplitude
            * (-(dx * dx / (2.0 * self.sigma_x * self.sigma_x)
                + dy * dy / (2.0 * self.sigma_y * self.sigma_y)))
                .exp()
    }
}

/// A labeled blob trajectory: keyframes interpolated linearly in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityScript {
    pub label: ActivityLabel,
    pub duration_s: f64,
    pub keys: Vec<BlobKey>,
}

impl ActivityScript {
    fn new(label: &str, duration_s: f64, keys: Vec<BlobKey>) -> Self {
        Self {
            label: ActivityLabel::new(label),
            duration_s,
            keys,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(SynthError::Script("duration must be positive".into()));
        }
        if self.keys.is_empty() {
            return Err(SynthError::Script("script has no keyframes".into()));
        }
        if self.keys.windows(2).any(|w| w[1].at < w[0].at) {
            return Err(SynthError::Script("keyframes out of order".into()));
        }
        for k in &self.keys {
            for s in [k.sigma_x, k.sigma_y] {
                if !(s.is_finite() && s > 0.0) {
                    return Err(SynthError::DegenerateSigma(s));
                }
            }
        }
        Ok(())
    }

    /// Blob state at normalized time `s`, holding the end keys outside
    /// their range.
    pub fn state_at(&self, s: f64) -> BlobKey {
        let first = &self.keys[0];
        if s <= first.at {
            return *first;
        }
        for w in self.keys.windows(2) {
            if s <= w[1].at {
                let span = w[1].at - w[0].at;
                let f = if span > 0.0 { (s - w[0].at) / span } else { 1.0 };
                return w[0].lerp(&w[1], f);
            }
        }
        *self.keys.last().unwrap()
    }

    /// Mirror image under `x ↦ 7 − x`, relabeled.
    pub fn mirrored_x(&self, label: &str) -> Self {
        let flip = (GRID_SIDE - 1) as f64;
        Self {
            label: ActivityLabel::new(label),
            duration_s: self.duration_s,
            keys: self
                .keys
                .iter()
                .map(|k| BlobKey { x: flip - k.x, ..*k })
                .collect(),
        }
    }

    fn map_keys(mut self, f: impl Fn(&mut BlobKey)) -> Self {
        self.keys.iter_mut().for_each(f);
        self
    }

    pub fn frame_count(&self, frame_rate_hz: f64) -> usize {
        ((self.duration_s * frame_rate_hz).round() as usize).max(1)
    }
}

/// A rendered sequence and how many pixel values had to be clamped into
/// the sensor range.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub sequence: ThermalSequence,
    pub clamped: usize,
}

pub fn render_sequence(
    scene: &SceneParams,
    script: &ActivityScript,
    seed: u64,
) -> Result<Rendered, SynthError> {
    render_with_ids(scene, script, seed, "synthetic", "synthetic")
}

pub fn render_with_ids(
    scene: &SceneParams,
    script: &ActivityScript,
    seed: u64,
    subject: &str,
    session: &str,
) -> Result<Rendered, SynthError> {
    scene.validate()?;
    script.validate()?;
    let n = script.frame_count(scene.frame_rate_hz);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, scene.noise_std).map_err(|e| SynthError::Scene(e.to_string()))?;
    let ambient = scene.ambient_field();
    let mut clamped = 0;
    let mut frames = Vec::with_capacity(n);
    for i in 0..n {
        let s = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
        let blob = script.state_at(s);
        let mut pixels = [0.0; PIXELS];
        for (p, v) in pixels.iter_mut().enumerate() {
            let (row, col) = ((p / GRID_SIDE) as f64, (p % GRID_SIDE) as f64);
            let mut t = ambient[p] + blob.value_at(col, row) + noise.sample(&mut rng);
            if scene.quantize_step > 0.0 {
                t = (t / scene.quantize_step).round() * scene.quantize_step;
            }
            if !(RAW_MIN_C..=RAW_MAX_C).contains(&t) {
                clamped += 1;
                t = t.clamp(RAW_MIN_C, RAW_MAX_C);
            }
            *v = t;
        }
        let ts = (i as f64 * 1000.0 / scene.frame_rate_hz).round() as u64;
        frames.push(ThermalFrame::new(pixels, ts).expect("rendered pixels are finite"));
    }
    let sequence = ThermalSequence::new(frames, script.label.clone(), subject, session, Stage::Raw)
        .expect("at least one frame");
    Ok(Rendered { sequence, clamped })
}

fn key(at: f64, x: f64, y: f64, sigma: f64, amplitude: f64) -> BlobKey {
    BlobKey {
        at,
        x,
        y,
        sigma_x: sigma,
        sigma_y: sigma,
        amplitude,
    }
}

const CENTRE: f64 = 3.5;
/// Peak temperature rise of a standing person seen from above.
pub const STAND_AMPLITUDE: f64 = 6.0;
const STAND_SIGMA: f64 = 1.0;
const SIT_AMPLITUDE: f64 = 5.0;
const SIT_SIGMA: f64 = 1.25;
/// Walks cross the room on a slight diagonal.
const WALK_DRIFT_Y: f64 = 1.0;

/// Nominal scripts for the seven daily-living classes, in label order.
pub fn builtin_scripts() -> Vec<ActivityScript> {
    let c = CENTRE;
    // Every fall topples towards +x; the body ends up lying, wider and cooler.
    let fall = ActivityScript::new(
        "fall",
        1.0,
        vec![
            key(0.0, c, c, STAND_SIGMA, STAND_AMPLITUDE),
            key(0.25, c, c, STAND_SIGMA, STAND_AMPLITUDE),
            BlobKey {
                at: 0.8,
                x: c + 2.5,
                y: c,
                sigma_x: 2.2,
                sigma_y: 1.5,
                amplitude: 3.2,
            },
            BlobKey {
                at: 1.0,
                x: c + 2.5,
                y: c,
                sigma_x: 2.2,
                sigma_y: 1.5,
                amplitude: 3.2,
            },
        ],
    );
    let sit_still = ActivityScript::new(
        "sit_still",
        5.0,
        vec![
            key(0.0, c, c, SIT_SIGMA, SIT_AMPLITUDE),
            key(0.5, c + 0.1, c, SIT_SIGMA, SIT_AMPLITUDE),
            key(1.0, c, c, SIT_SIGMA, SIT_AMPLITUDE),
        ],
    );
    let stand_still = ActivityScript::new(
        "stand_still",
        5.0,
        vec![
            key(0.0, c, c, STAND_SIGMA, STAND_AMPLITUDE),
            key(0.5, c + 0.1, c, STAND_SIGMA, STAND_AMPLITUDE),
            key(1.0, c, c, STAND_SIGMA, STAND_AMPLITUDE),
        ],
    );
    let sit_to_stand = ActivityScript::new(
        "sit_to_stand",
        2.0,
        vec![
            key(0.0, c, c + 0.5, 1.4, 4.6),
            key(0.2, c, c + 0.5, 1.4, 4.6),
            key(0.8, c, c, STAND_SIGMA, STAND_AMPLITUDE),
            key(1.0, c, c, STAND_SIGMA, STAND_AMPLITUDE),
        ],
    );
    let stand_to_sit = ActivityScript::new(
        "stand_to_sit",
        2.0,
        sit_to_stand
            .keys
            .iter()
            .rev()
            .map(|k| BlobKey { at: 1.0 - k.at, ..*k })
            .collect(),
    );
    let walk_left_right = ActivityScript::new(
        "walk_left_right",
        3.0,
        vec![
            key(0.0, 0.0, c - WALK_DRIFT_Y, STAND_SIGMA, STAND_AMPLITUDE),
            key(1.0, 7.0, c + WALK_DRIFT_Y, STAND_SIGMA, STAND_AMPLITUDE),
        ],
    );
    let walk_right_left = walk_left_right.mirrored_x("walk_right_left");
    vec![
        fall,
        sit_still,
        stand_still,
        sit_to_stand,
        stand_to_sit,
        walk_left_right,
        walk_right_left,
    ]
}

/// Traits of one synthetic person, constant across their sessions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub amplitude_scale: f64,
    pub sigma_scale: f64,
    pub speed: f64,
    pub home_x: f64,
    pub home_y: f64,
}

impl SubjectProfile {
    pub fn draw(rng: &mut impl Rng) -> Self {
        Self {
            amplitude_scale: rng.random_range(0.85..1.15),
            sigma_scale: rng.random_range(0.92..1.08),
            speed: rng.random_range(0.85..1.15),
            home_x: CENTRE + rng.random_range(-0.75..0.75),
            home_y: CENTRE + rng.random_range(-0.75..0.75),
        }
    }
}

/// One instance of a builtin activity with subject traits and per-instance
/// jitter applied. Both walks draw the same random numbers, so with equal
/// seeds `walk_right_left` is the exact mirror of `walk_left_right`.
pub fn instance_script(label: &str, profile: &SubjectProfile, seed: u64) -> Result<ActivityScript, SynthError> {
    // The right-to-left walk is rendered as a mirrored left-to-right walk.
    let source = if label == "walk_right_left" { "walk_left_right" } else { label };
    let nominal = builtin_scripts()
        .into_iter()
        .find(|s| s.label.as_str() == source)
        .ok_or_else(|| SynthError::Script(format!("no builtin script for {label}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let speed = profile.speed * rng.random_range(0.85..1.15);
    let amp = profile.amplitude_scale * rng.random_range(0.9..1.1);
    let sigma = profile.sigma_scale * rng.random_range(0.9..1.1);
    let dx = rng.random_range(-0.4..0.4);
    let dy = rng.random_range(-0.4..0.4);
    let (hx, hy) = (profile.home_x - CENTRE + dx, profile.home_y - CENTRE + dy);

    let base = ActivityScript {
        duration_s: nominal.duration_s / speed,
        ..nominal
    }
    .map_keys(|k| {
        k.amplitude *= amp;
        k.sigma_x *= sigma;
        k.sigma_y *= sigma;
    });
    let script = match label {
        "walk_left_right" => base.map_keys(|k| k.y += hy),
        "walk_right_left" => base
            .map_keys(|k| k.y += hy)
            .mirrored_x("walk_right_left"),
        _ => base.map_keys(|k| {
            k.x += hx;
            k.y += hy;
        }),
    };
    Ok(script)
}

/// Empty-scene script used for background clips.
pub fn empty_scene_script(duration_s: f64) -> ActivityScript {
    ActivityScript::new(
        "background",
        duration_s,
        vec![key(0.0, CENTRE, CENTRE, 1.0, 0.0)],
    )
}

/// splitmix64 finalizer used to derive independent per-item seeds.
pub fn mix_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut z = seed;
    for &p in parts {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(p);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub subjects: usize,
    pub reps: usize,
    pub seed: u64,
    pub scene: SceneParams,
    pub background_duration_s: f64,
    /// Per-session ambient drift is uniform in ±this many °C.
    pub session_drift_c: f64,
    /// Nominal duration overrides in seconds, keyed by activity label.
    pub durations_s: BTreeMap<String, f64>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            subjects: 8,
            reps: 3,
            seed: 42,
            scene: SceneParams::default(),
            background_duration_s: 5.0,
            session_drift_c: 0.4,
            durations_s: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusItem {
    pub file_name: String,
    pub sequence: ThermalSequence,
    pub is_background: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub items: Vec<CorpusItem>,
    pub clamped: usize,
    pub sensor_id: String,
}

impl Corpus {
    pub fn activities(&self) -> impl Iterator<Item = &CorpusItem> {
        self.items.iter().filter(|i| !i.is_background)
    }

    pub fn manifest(&self) -> DatasetManifest {
        let entries = self
            .items
            .iter()
            .map(|item| {
                let s = &item.sequence;
                if item.is_background {
                    ManifestEntry::background(&item.file_name, Some(s.session_id()))
                } else {
                    ManifestEntry::activity(
                        &item.file_name,
                        s.label().as_str(),
                        s.subject_id(),
                        s.session_id(),
                    )
                }
            })
            .collect();
        DatasetManifest {
            label_set: ADL_LABELS.iter().map(|s| s.to_string()).collect(),
            sensor_id: self.sensor_id.clone(),
            entries,
            base_dir: Default::default(),
        }
    }

    /// Writes every sequence as a frame CSV plus `manifest.json`.
    pub fn write_to(&self, dir: &Path) -> Result<(), SynthError> {
        let io_err = |path: &Path| {
            let path = path.display().to_string();
            move |source| SynthError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        for item in &self.items {
            let path = dir.join(&item.file_name);
            fs::write(&path, item.sequence.to_csv()).map_err(io_err(&path))?;
        }
        let path = dir.join("manifest.json");
        fs::write(&path, self.manifest().to_json()).map_err(io_err(&path))
    }
}

/// Renders `subjects × reps` sessions, each with one background clip and
/// one instance of every builtin activity.
pub fn generate_corpus(cfg: &CorpusConfig) -> Result<Corpus, SynthError> {
    cfg.scene.validate()?;
    let nominal = builtin_scripts();
    for (label, &d) in &cfg.durations_s {
        if !nominal.iter().any(|s| s.label.as_str() == label) {
            return Err(SynthError::Script(format!("no builtin script for {label}")));
        }
        if !(d.is_finite() && d > 0.0) {
            return Err(SynthError::Script(format!("duration of {label} must be positive")));
        }
    }
    let labels = adl_label_set();
    let jobs: Vec<(usize, usize, Option<usize>)> = (0..cfg.subjects)
        .flat_map(|s| {
            (0..cfg.reps).flat_map(move |r| {
                std::iter::once((s, r, None)).chain((0..ADL_LABELS.len()).map(move |a| (s, r, Some(a))))
            })
        })
        .collect();
    let rendered: Vec<Result<(CorpusItem, usize), SynthError>> = jobs
        .par_iter()
        .map(|&(s, r, activity)| {
            let subject = format!("s{:02}", s + 1);
            let session = format!("{subject}_r{r}");
            let mut profile_rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, &[1, s as u64]));
            let profile = SubjectProfile::draw(&mut profile_rng);
            let mut drift_rng =
                ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, &[2, s as u64, r as u64]));
            let scene = SceneParams {
                ambient_mean: cfg.scene.ambient_mean
                    + drift_rng.random_range(-cfg.session_drift_c..=cfg.session_drift_c),
                ..cfg.scene.clone()
            };
            let (script, file_name, tag) = match activity {
                None => (
                    empty_scene_script(cfg.background_duration_s),
                    format!("{session}_background.csv"),
                    99,
                ),
                Some(a) => {
                    let label = labels[a].as_str();
                    // Both walks share a jitter seed so they mirror each other.
                    let jitter_tag = if label == "walk_right_left" { 5 } else { a as u64 };
                    let jitter = mix_seed(cfg.seed, &[3, s as u64, r as u64, jitter_tag]);
                    let mut script = instance_script(label, &profile, jitter)?;
                    if let Some(d) = cfg.durations_s.get(label) {
                        script.duration_s *= d / nominal[a].duration_s;
                    }
                    (
                        script,
                        format!("{session}_{label}.csv"),
                        a as u64,
                    )
                }
            };
            let noise_seed = mix_seed(cfg.seed, &[4, s as u64, r as u64, tag]);
            let out = render_with_ids(&scene, &script, noise_seed, &subject, &session)?;
            Ok((
                CorpusItem {
                    file_name,
                    sequence: out.sequence,
                    is_background: activity.is_none(),
                },
                out.clamped,
            ))
        })
        .collect();
    let mut items = Vec::with_capacity(rendered.len());
    let mut clamped = 0;
    for r in rendered {
        let (item, c) = r?;
        clamped += c;
        items.push(item);
    }
    Ok(Corpus {
        items,
        clamped,
        sensor_id: "synthetic-ceiling".to_string(),
    })
}
