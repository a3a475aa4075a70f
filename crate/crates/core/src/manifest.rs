//! Dataset manifest: which frame files belong to a corpus, their labels,
//! subjects, sessions, and the empty-scene clips used as backgrounds.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{parse_frames, ActivityLabel, Stage, ThermalSequence};
use crate::preprocess::{estimate_background, BackgroundModel};

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("manifest {path} is not valid JSON: {source}")]
    Syntax {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("manifest {path} is invalid:\n  - {}", problems.join("\n  - "))]
    Invalid { path: PathBuf, problems: Vec<String> },
    #[error("label sets differ between pooled datasets")]
    LabelSetMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryRole {
    #[default]
    Activity,
    Background,
}

/// One line of the manifest. Background entries carry no label; a
/// background without a session is the dataset-wide fallback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
    #[serde(default, skip_serializing_if = "is_activity")]
    pub role: EntryRole,
}

fn is_activity(role: &EntryRole) -> bool {
    *role == EntryRole::Activity
}

impl ManifestEntry {
    pub fn activity(path: &str, label: &str, subject: &str, session: &str) -> Self {
        Self {
            path: path.to_string(),
            label: Some(label.to_string()),
            subject: Some(subject.to_string()),
            session: Some(session.to_string()),
            role: EntryRole::Activity,
        }
    }

    pub fn background(path: &str, session: Option<&str>) -> Self {
        Self {
            path: path.to_string(),
            label: None,
            subject: None,
            session: session.map(str::to_string),
            role: EntryRole::Background,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub label_set: Vec<String>,
    pub sensor_id: String,
    pub entries: Vec<ManifestEntry>,
    /// Directory that relative entry paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        let p = Path::new(&entry.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn activity_entries(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries
            .iter()
            .filter(|e| e.role == EntryRole::Activity)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    /// Checks every invariant and returns all violations found.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let labels: HashSet<&str> = self.label_set.iter().map(String::as_str).collect();
        if labels.len() != self.label_set.len() {
            problems.push("label_set contains duplicate names".to_string());
        }
        if self.activity_entries().next().is_none() {
            problems.push("empty dataset".to_string());
        }
        let mut paths = HashSet::new();
        let mut bg_keys = HashSet::new();
        for (i, entry) in self.entries.iter().enumerate() {
            if !paths.insert(entry.path.as_str()) {
                problems.push(format!("entry {i}: duplicate path {}", entry.path));
            }
            match entry.role {
                EntryRole::Activity => {
                    match &entry.label {
                        None => problems.push(format!("entry {i} ({}): missing label", entry.path)),
                        Some(l) if !labels.contains(l.as_str()) => problems.push(format!(
                            "entry {i} ({}): unknown label {l:?}",
                            entry.path
                        )),
                        _ => {}
                    }
                    if entry.subject.is_none() {
                        problems.push(format!("entry {i} ({}): missing subject", entry.path));
                    }
                    if entry.session.is_none() {
                        problems.push(format!("entry {i} ({}): missing session", entry.path));
                    }
                }
                EntryRole::Background => {
                    if !bg_keys.insert(entry.session.clone()) {
                        problems.push(format!(
                            "entry {i} ({}): second background for session {:?}",
                            entry.path,
                            entry.session.as_deref().unwrap_or("<global>")
                        ));
                    }
                }
            }
            let full = self.resolve(entry);
            match fs::read(&full) {
                Err(_) => problems.push(format!("entry {i}: missing file {}", full.display())),
                Ok(bytes) => match parse_frames(&bytes) {
                    Err(e) => problems.push(format!("entry {i} ({}): {e}", full.display())),
                    Ok(frames) if entry.role == EntryRole::Activity && frames.len() < 2 => {
                        problems.push(format!(
                            "entry {i} ({}): activity needs at least 2 frames, found {}",
                            full.display(),
                            frames.len()
                        ))
                    }
                    Ok(_) => {}
                },
            }
        }
        for (i, entry) in self.activity_entries().enumerate() {
            if self.background_for(entry).is_none() {
                problems.push(format!(
                    "activity {i} ({}): no background clip for session {:?} and no global background",
                    entry.path,
                    entry.session.as_deref().unwrap_or("")
                ));
            }
        }
        problems
    }

    /// Background entry for an activity: the clip declared for its
    /// session, else the global one.
    pub fn background_for(&self, entry: &ManifestEntry) -> Option<&ManifestEntry> {
        let backgrounds = || self.entries.iter().filter(|e| e.role == EntryRole::Background);
        backgrounds()
            .find(|b| b.session.is_some() && b.session == entry.session)
            .or_else(|| backgrounds().find(|b| b.session.is_none()))
    }
}

/// Reads and fully validates a manifest, including parsing every frame
/// file it references. The error lists every violation.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest, ManifestError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|source| ManifestError::Syntax {
            path: path.to_path_buf(),
            source,
        })?;
    manifest.base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let problems = manifest.validate();
    if problems.is_empty() {
        Ok(manifest)
    } else {
        Err(ManifestError::Invalid {
            path: path.to_path_buf(),
            problems,
        })
    }
}

/// An activity sequence with its resolved background model.
#[derive(Debug, Clone)]
pub struct Sample {
    pub path: PathBuf,
    pub sequence: ThermalSequence,
    pub background: Arc<BackgroundModel>,
    pub sensor_id: String,
}

/// All activity sequences of one or more manifests, loaded into memory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub label_set: Vec<ActivityLabel>,
    pub samples: Vec<Sample>,
}

impl Dataset {
    /// Loads the sequences of an already validated manifest.
    pub fn from_manifest(manifest: &DatasetManifest) -> Result<Self, ManifestError> {
        let invalid = |problems: Vec<String>| ManifestError::Invalid {
            path: manifest.base_dir.clone(),
            problems,
        };
        let mut bg_cache: HashMap<PathBuf, Arc<BackgroundModel>> = HashMap::new();
        let mut samples = Vec::new();
        for entry in manifest.activity_entries() {
            let bg_entry = manifest
                .background_for(entry)
                .ok_or_else(|| invalid(vec![format!("no background for {}", entry.path)]))?;
            let bg_path = manifest.resolve(bg_entry);
            let background = match bg_cache.get(&bg_path) {
                Some(bg) => bg.clone(),
                None => {
                    let bg = read_sequence(&bg_path, ActivityLabel::new("background"), "", "")
                        .and_then(|seq| {
                            estimate_background(&seq).map_err(|e| format!("{}: {e}", bg_path.display()))
                        })
                        .map_err(|p| invalid(vec![p]))?;
                    let bg = Arc::new(bg);
                    bg_cache.insert(bg_path, bg.clone());
                    bg
                }
            };
            let path = manifest.resolve(entry);
            let sequence = read_sequence(
                &path,
                ActivityLabel::new(entry.label.clone().unwrap_or_default()),
                entry.subject.as_deref().unwrap_or_default(),
                entry.session.as_deref().unwrap_or_default(),
            )
            .map_err(|p| invalid(vec![p]))?;
            samples.push(Sample {
                path,
                sequence,
                background,
                sensor_id: manifest.sensor_id.clone(),
            });
        }
        Ok(Self {
            label_set: manifest.label_set.iter().map(|s| ActivityLabel::new(s.as_str())).collect(),
            samples,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ManifestError> {
        Self::from_manifest(&load_manifest(path)?)
    }

    /// Pools single-sensor corpora that share a label set.
    pub fn pooled(datasets: Vec<Dataset>) -> Result<Self, ManifestError> {
        let mut iter = datasets.into_iter();
        let mut first = iter.next().ok_or_else(|| ManifestError::Invalid {
            path: PathBuf::new(),
            problems: vec!["empty dataset".to_string()],
        })?;
        for d in iter {
            if d.label_set != first.label_set {
                return Err(ManifestError::LabelSetMismatch);
            }
            first.samples.extend(d.samples);
        }
        Ok(first)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn label_index(&self, label: &ActivityLabel) -> Option<usize> {
        self.label_set.iter().position(|l| l == label)
    }

    /// Class index of every sample.
    pub fn class_indices(&self) -> Vec<usize> {
        self.samples
            .iter()
            .map(|s| {
                self.label_index(s.sequence.label())
                    .expect("validated labels belong to the label set")
            })
            .collect()
    }

    /// Subject id of every sample.
    pub fn subjects(&self) -> Vec<String> {
        self.samples
            .iter()
            .map(|s| s.sequence.subject_id().to_string())
            .collect()
    }
}

pub fn read_sequence(
    path: &Path,
    label: ActivityLabel,
    subject: &str,
    session: &str,
) -> Result<ThermalSequence, String> {
    let bytes = fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let frames = parse_frames(&bytes).map_err(|e| format!("{}: {e}", path.display()))?;
    ThermalSequence::new(frames, label, subject, session, Stage::Raw)
        .map_err(|e| format!("{}: {e}", path.display()))
}
