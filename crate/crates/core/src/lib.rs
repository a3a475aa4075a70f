//! Activity and fall recognition from 8×8 thermopile array sequences.
//!
//! The pipeline subtracts a per-pixel empty-scene background, resamples
//! each sequence to a fixed frame count, extracts temporal (per-pixel 1-D
//! DCT) and spatial (per-frame 2-D DCT) magnitude features, and classifies
//! them with a one-vs-rest linear SVM. Cross-validation harnesses and a
//! synthetic corpus generator sit around that core.

pub mod classifier;
pub mod cli;
pub mod config;
pub mod eval;
pub mod features;
pub mod frame;
pub mod manifest;
pub mod pipeline;
pub mod preprocess;
pub mod synthgen;

pub use classifier::{load_model, save_model, train, SvmConfig, SvmModel};
pub use config::PipelineConfig;
pub use eval::{run_pipeline_cv, EvalReport, Protocol};
pub use features::{extract_features, FeatureConfig, FeatureVector};
pub use frame::{ActivityLabel, Stage, ThermalFrame, ThermalSequence};
pub use manifest::{load_manifest, Dataset, DatasetManifest};
pub use preprocess::{estimate_background, resample_equal_interval, subtract_background, BackgroundModel};
