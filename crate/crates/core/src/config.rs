//! Pipeline configuration file and dotted-key overrides.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::classifier::SvmConfig;
use crate::eval::Protocol;
use crate::features::FeatureConfig;
use crate::preprocess::DEFAULT_TARGET_LEN;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("unknown config key {0}")]
    UnknownKey(String),
    #[error("bad value for {key}: {reason}")]
    BadValue { key: String, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessSection {
    pub target_len: usize,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        Self {
            target_len: DEFAULT_TARGET_LEN,
        }
    }
}

/// Feature parameters; the sequence length comes from `preprocess`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureSection {
    pub temporal_k: usize,
    pub spatial_block: usize,
}

impl Default for FeatureSection {
    fn default() -> Self {
        let d = FeatureConfig::default();
        Self {
            temporal_k: d.temporal_k,
            spatial_block: d.spatial_block,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolName {
    Loso,
    Kfold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub protocol: ProtocolName,
    pub k: usize,
    pub seed: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            protocol: ProtocolName::Loso,
            k: 10,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub preprocess: PreprocessSection,
    pub features: FeatureSection,
    pub svm: SvmConfig,
    pub eval: EvalSection,
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let name = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: name.clone(),
            source,
        })?;
        let cfg: Self =
            serde_json::from_str(&text).map_err(|source| ConfigError::Parse { path: name, source })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            temporal_k: self.features.temporal_k,
            spatial_block: self.features.spatial_block,
            sequence_len: self.preprocess.target_len,
        }
    }

    pub fn protocol(&self) -> Protocol {
        match self.eval.protocol {
            ProtocolName::Loso => Protocol::Loso,
            ProtocolName::Kfold => Protocol::Kfold {
                k: self.eval.k,
                seed: self.eval.seed,
            },
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.preprocess.target_len == 0 {
            return Err(ConfigError::Invalid("preprocess.target_len must be positive".into()));
        }
        self.feature_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.svm
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.eval.protocol == ProtocolName::Kfold && self.eval.k < 2 {
            return Err(ConfigError::Invalid("eval.k must be at least 2".into()));
        }
        Ok(())
    }

    /// Sets one dotted key such as `features.temporal_k`. The value is
    /// read as JSON when it parses, else as a bare string.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let mut tree = serde_json::to_value(*self).expect("config serializes");
        let mut slot = &mut tree;
        for part in key.split('.') {
            slot = slot
                .as_object_mut()
                .and_then(|o| o.get_mut(part))
                .ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
        }
        if slot.is_object() {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        *slot = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
        *self = serde_json::from_value(tree).map_err(|e| ConfigError::BadValue {
            key: key.to_string(),
            reason: e.to_string(),
        })?;
        Ok(())
    }

    pub fn to_json_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.feature_config(), FeatureConfig::default());
        assert_eq!(cfg.protocol(), Protocol::Loso);
        cfg.validate().unwrap();
    }

    #[test]
    fn dotted_overrides() {
        let mut cfg = PipelineConfig::default();
        cfg.apply_override("features.temporal_k", "4").unwrap();
        cfg.apply_override("eval.protocol", "kfold").unwrap();
        cfg.apply_override("eval.k", "10").unwrap();
        cfg.apply_override("svm.regularization_c", "0.5").unwrap();
        assert_eq!(cfg.features.temporal_k, 4);
        assert_eq!(cfg.protocol(), Protocol::Kfold { k: 10, seed: 42 });
        assert_eq!(cfg.svm.regularization_c, 0.5);
        assert!(matches!(
            cfg.apply_override("features.bogus", "1"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            cfg.apply_override("features", "1"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            cfg.apply_override("eval.k", "many"),
            Err(ConfigError::BadValue { .. })
        ));
    }

    #[test]
    fn unknown_keys_in_file_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"features": {"temporal_k": 5, "extra": 1}}"#).unwrap();
        assert!(matches!(
            PipelineConfig::load(&path),
            Err(ConfigError::Parse { .. })
        ));
        fs::write(&path, r#"{"svm": {"max_epochs": 50}}"#).unwrap();
        let cfg = PipelineConfig::load(&path).unwrap();
        assert_eq!(cfg.svm.max_epochs, 50);
        assert_eq!(cfg.svm.regularization_c, 1.0);
    }

    #[test]
    fn hash_tracks_content() {
        let a = PipelineConfig::default();
        let mut b = a;
        assert_eq!(a.hash(), b.hash());
        b.eval.seed = 7;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
