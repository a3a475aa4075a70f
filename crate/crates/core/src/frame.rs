//! Frame and sequence containers plus the frame CSV format.
//!
//! A frame file holds one frame per row: either 64 bare pixel columns or a
//! leading integer `timestamp_ms` column followed by the 64 pixels, row-major
//! (`p00` is the top-left pixel, `p07` the end of the first row). Lines
//! starting with `#` and blank lines are skipped, and a single header row
//! (`timestamp_ms,p00,...` or `p00,...`) may precede the data.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Side length of the sensor grid.
pub const GRID_SIDE: usize = 8;
/// Pixels per frame.
pub const PIXELS: usize = GRID_SIDE * GRID_SIDE;
/// Lowest temperature the sensor reports, in °C.
pub const RAW_MIN_C: f64 = 0.0;
/// Highest temperature the sensor reports, in °C.
pub const RAW_MAX_C: f64 = 80.0;

#[derive(Debug, Error, PartialEq)]
pub enum FrameError {
    #[error("empty frame file")]
    Empty,
    #[error("line {line}: expected 64 or 65 fields, found {found}")]
    Arity { line: usize, found: usize },
    #[error("line {line}, field {field}: cannot parse {text:?} as a number")]
    NotNumeric {
        line: usize,
        field: usize,
        text: String,
    },
    #[error("line {line}, field {field}: value is not finite")]
    NonFinite { line: usize, field: usize },
    #[error("line {line}, field {field}: raw temperature {value} outside [0, 80] °C")]
    OutOfRange {
        line: usize,
        field: usize,
        value: f64,
    },
    #[error("line {line}: timestamp {text:?} is not a non-negative integer")]
    BadTimestamp { line: usize, text: String },
    #[error("frame file is not valid UTF-8")]
    Encoding,
    #[error("pixel {index} is not finite")]
    NonFinitePixel { index: usize },
    #[error("sequence has no frames")]
    NoFrames,
}

/// Whether background has been removed from a sequence's frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Raw,
    Subtracted,
}

/// One 8×8 thermal image, row-major, in °C.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalFrame {
    pixels: [f64; PIXELS],
    timestamp_ms: u64,
}

impl ThermalFrame {
    pub fn new(pixels: [f64; PIXELS], timestamp_ms: u64) -> Result<Self, FrameError> {
        if let Some(index) = pixels.iter().position(|p| !p.is_finite()) {
            return Err(FrameError::NonFinitePixel { index });
        }
        Ok(Self {
            pixels,
            timestamp_ms,
        })
    }

    pub fn filled(value: f64, timestamp_ms: u64) -> Result<Self, FrameError> {
        Self::new([value; PIXELS], timestamp_ms)
    }

    pub fn pixels(&self) -> &[f64; PIXELS] {
        &self.pixels
    }

    pub fn timestamp_ms(&self) -> u64 {
        self.timestamp_ms
    }

    pub fn pixel(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * GRID_SIDE + col]
    }

    /// Applies `f` to every pixel. The caller is responsible for keeping
    /// values finite.
    pub(crate) fn map_pixels(&self, mut f: impl FnMut(usize, f64) -> f64) -> Self {
        let mut pixels = self.pixels;
        for (i, p) in pixels.iter_mut().enumerate() {
            *p = f(i, *p);
        }
        Self {
            pixels,
            timestamp_ms: self.timestamp_ms,
        }
    }

    fn in_raw_range(&self) -> Option<(usize, f64)> {
        self.pixels
            .iter()
            .copied()
            .enumerate()
            .find(|&(_, v)| !(RAW_MIN_C..=RAW_MAX_C).contains(&v))
    }
}

/// Activity label name. Membership in a label set is checked by the
/// dataset that owns the sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActivityLabel(String);

impl ActivityLabel {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ActivityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ActivityLabel {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

/// Label used for the fall class.
pub const FALL_LABEL: &str = "fall";

/// The seven activity classes of the overhead-sensor daily-living corpus,
/// in canonical order.
pub const ADL_LABELS: [&str; 7] = [
    "fall",
    "sit_still",
    "stand_still",
    "sit_to_stand",
    "stand_to_sit",
    "walk_left_right",
    "walk_right_left",
];

pub fn adl_label_set() -> Vec<ActivityLabel> {
    ADL_LABELS.iter().map(|&s| ActivityLabel::new(s)).collect()
}

/// An ordered run of frames for one labeled activity instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalSequence {
    frames: Vec<ThermalFrame>,
    label: ActivityLabel,
    subject_id: String,
    session_id: String,
    stage: Stage,
}

impl ThermalSequence {
    pub fn new(
        frames: Vec<ThermalFrame>,
        label: ActivityLabel,
        subject_id: impl Into<String>,
        session_id: impl Into<String>,
        stage: Stage,
    ) -> Result<Self, FrameError> {
        if frames.is_empty() {
            return Err(FrameError::NoFrames);
        }
        Ok(Self {
            frames,
            label,
            subject_id: subject_id.into(),
            session_id: session_id.into(),
            stage,
        })
    }

    /// Parses a frame CSV and attaches the metadata, which always comes
    /// from the caller (normally the manifest) rather than the file.
    pub fn from_csv(
        bytes: &[u8],
        label: ActivityLabel,
        subject_id: impl Into<String>,
        session_id: impl Into<String>,
    ) -> Result<Self, FrameError> {
        let frames = parse_frames(bytes)?;
        Self::new(frames, label, subject_id, session_id, Stage::Raw)
    }

    pub fn frames(&self) -> &[ThermalFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn label(&self) -> &ActivityLabel {
        &self.label
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    /// Same metadata, new frames and stage.
    pub(crate) fn with_frames(&self, frames: Vec<ThermalFrame>, stage: Stage) -> Self {
        Self {
            frames,
            label: self.label.clone(),
            subject_id: self.subject_id.clone(),
            session_id: self.session_id.clone(),
            stage,
        }
    }

    /// Time series of one pixel across all frames.
    pub fn pixel_series(&self, index: usize) -> Vec<f64> {
        self.frames.iter().map(|f| f.pixels[index]).collect()
    }

    /// Serializes to the frame CSV format with a header and timestamp
    /// column. Values use shortest round-trip formatting, so parsing the
    /// output reproduces every pixel bit for bit.
    pub fn to_csv(&self) -> String {
        write_frames(&self.frames)
    }
}

pub fn write_frames(frames: &[ThermalFrame]) -> String {
    let mut out = String::with_capacity(frames.len() * PIXELS * 6);
    out.push_str("timestamp_ms");
    for r in 0..GRID_SIDE {
        for c in 0..GRID_SIDE {
            let _ = write!(out, ",p{r}{c}");
        }
    }
    out.push('\n');
    for frame in frames {
        let _ = write!(out, "{}", frame.timestamp_ms);
        for v in &frame.pixels {
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    out
}

fn is_header(fields: &[&str]) -> bool {
    matches!(fields.first(), Some(&"timestamp_ms") | Some(&"p00"))
}

/// Parses raw frames from CSV bytes. Raw frames must lie in the sensor's
/// measurement range.
pub fn parse_frames(bytes: &[u8]) -> Result<Vec<ThermalFrame>, FrameError> {
    let text = std::str::from_utf8(bytes).map_err(|_| FrameError::Encoding)?;
    let mut frames = Vec::new();
    let mut seen_data = false;
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if !seen_data && is_header(&fields) {
            seen_data = true;
            continue;
        }
        seen_data = true;
        let (timestamp_ms, pixel_fields) = match fields.len() {
            n if n == PIXELS => (0, &fields[..]),
            n if n == PIXELS + 1 => {
                let ts = fields[0]
                    .parse::<u64>()
                    .map_err(|_| FrameError::BadTimestamp {
                        line: line_no,
                        text: fields[0].to_string(),
                    })?;
                (ts, &fields[1..])
            }
            found => {
                return Err(FrameError::Arity {
                    line: line_no,
                    found,
                })
            }
        };
        let offset = fields.len() - PIXELS;
        let mut pixels = [0.0; PIXELS];
        for (j, text) in pixel_fields.iter().enumerate() {
            let field = j + offset + 1;
            let v: f64 = text.parse().map_err(|_| FrameError::NotNumeric {
                line: line_no,
                field,
                text: text.to_string(),
            })?;
            if !v.is_finite() {
                return Err(FrameError::NonFinite {
                    line: line_no,
                    field,
                });
            }
            pixels[j] = v;
        }
        let frame = ThermalFrame {
            pixels,
            timestamp_ms,
        };
        if let Some((j, value)) = frame.in_raw_range() {
            return Err(FrameError::OutOfRange {
                line: line_no,
                field: j + offset + 1,
                value,
            });
        }
        frames.push(frame);
    }
    if frames.is_empty() {
        return Err(FrameError::Empty);
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(values: &[&str]) -> String {
        values.join(",")
    }

    #[test]
    fn constant_rows_parse_to_constant_frames() {
        let line = row(&["20.0"; 64]);
        let text = (0..10).map(|_| line.clone()).collect::<Vec<_>>().join("\n");
        let seq = ThermalSequence::from_csv(text.as_bytes(), "sit_still".into(), "s1", "a")
            .unwrap();
        assert_eq!(seq.len(), 10);
        assert!(seq
            .frames()
            .iter()
            .all(|f| f.pixels().iter().all(|&p| p == 20.0) && f.timestamp_ms() == 0));
        assert_eq!(seq.stage(), Stage::Raw);
    }

    #[test]
    fn short_row_reports_line_number() {
        let good = row(&["20.0"; 64]);
        let bad = row(&["20.0"; 63]);
        let text = format!("# logger dump\n{good}\n{bad}\n");
        assert_eq!(
            parse_frames(text.as_bytes()),
            Err(FrameError::Arity { line: 3, found: 63 })
        );
    }

    #[test]
    fn timestamp_column_is_kept() {
        let mut fields = vec!["1500"];
        fields.extend(["21.25"; 64]);
        let frames = parse_frames(row(&fields).as_bytes()).unwrap();
        assert_eq!(frames[0].timestamp_ms(), 1500);
        assert_eq!(frames[0].pixel(7, 7), 21.25);
    }

    #[test]
    fn rejects_bad_values() {
        let mut fields = vec!["20.0"; 64];
        fields[5] = "NaN";
        assert_eq!(
            parse_frames(row(&fields).as_bytes()),
            Err(FrameError::NonFinite { line: 1, field: 6 })
        );
        fields[5] = "81.0";
        assert!(matches!(
            parse_frames(row(&fields).as_bytes()),
            Err(FrameError::OutOfRange { line: 1, field: 6, .. })
        ));
        fields[5] = "warm";
        assert!(matches!(
            parse_frames(row(&fields).as_bytes()),
            Err(FrameError::NotNumeric { .. })
        ));
        let mut ts = vec!["-3"];
        ts.extend(["20.0"; 64]);
        assert!(matches!(
            parse_frames(row(&ts).as_bytes()),
            Err(FrameError::BadTimestamp { line: 1, .. })
        ));
    }

    #[test]
    fn empty_file_is_an_error() {
        assert_eq!(parse_frames(b""), Err(FrameError::Empty));
        assert_eq!(parse_frames(b"# only a comment\n\n"), Err(FrameError::Empty));
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let mut pixels = [0.0; PIXELS];
        for (i, p) in pixels.iter_mut().enumerate() {
            *p = 20.0 + (i as f64) * 0.1 + 1.0 / 3.0;
        }
        let frames = vec![
            ThermalFrame::new(pixels, 0).unwrap(),
            ThermalFrame::new(pixels.map(|p| p + 0.7), 100).unwrap(),
        ];
        let seq =
            ThermalSequence::new(frames, "fall".into(), "s1", "r0", Stage::Raw).unwrap();
        let back =
            ThermalSequence::from_csv(seq.to_csv().as_bytes(), "fall".into(), "s1", "r0")
                .unwrap();
        assert_eq!(back, seq);
    }

    #[test]
    fn frame_rejects_non_finite() {
        let mut pixels = [1.0; PIXELS];
        pixels[9] = f64::INFINITY;
        assert_eq!(
            ThermalFrame::new(pixels, 0),
            Err(FrameError::NonFinitePixel { index: 9 })
        );
    }
}
