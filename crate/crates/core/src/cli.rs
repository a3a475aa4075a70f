//! `thermact` command line: generate, featurize, train, evaluate, predict.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::classifier::{train_indexed, SvmModel};
use crate::config::PipelineConfig;
use crate::eval::{run_pipeline_cv, Provenance};
use crate::features::FeatureExtractor;
use crate::manifest::{read_sequence, Dataset};
use crate::pipeline::{featurize_dataset, featurize_sequence};
use crate::preprocess::estimate_background;
use crate::frame::ActivityLabel;
use crate::synthgen::{generate_corpus, CorpusConfig, SceneParams};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "thermact", version, about = "Activity recognition from 8x8 thermal sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic labeled corpus (frame CSVs plus manifest.json).
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        subjects: usize,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// JSON scene parameters; omitted keys keep their defaults.
        #[arg(long)]
        scene: Option<PathBuf>,
        /// Nominal activity duration, e.g. `fall=1.5`; repeatable.
        #[arg(long = "duration", value_name = "LABEL=SECONDS", value_parser = parse_duration)]
        durations: Vec<(String, f64)>,
    },
    /// Write one CSV row of features per sequence.
    Featurize {
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Output CSV; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train on every sequence of a dataset and save the model.
    Train {
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate the pipeline and report metrics.
    Evaluate {
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// JSON report destination.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Classify raw frame files with a trained model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Empty-scene frame CSV used as the background.
        #[arg(long)]
        background: PathBuf,
        /// Also print the per-class decision scores.
        #[arg(long)]
        scores: bool,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct PipelineArgs {
    /// Dataset manifest; repeat to pool several single-sensor corpora.
    #[arg(long = "data", required = true)]
    data: Vec<PathBuf>,
    /// Pipeline config JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args)]
struct Overrides {
    #[arg(long = "preprocess.target_len", value_name = "N")]
    target_len: Option<String>,
    #[arg(long = "features.temporal_k", value_name = "K")]
    temporal_k: Option<String>,
    #[arg(long = "features.spatial_block", value_name = "B")]
    spatial_block: Option<String>,
    #[arg(long = "svm.regularization_c", value_name = "C")]
    regularization_c: Option<String>,
    #[arg(long = "svm.max_epochs", value_name = "N")]
    max_epochs: Option<String>,
    #[arg(long = "svm.tolerance", value_name = "TOL")]
    tolerance: Option<String>,
    #[arg(long = "svm.seed", value_name = "SEED")]
    svm_seed: Option<String>,
    #[arg(long = "eval.protocol", value_name = "loso|kfold")]
    protocol: Option<String>,
    #[arg(long = "eval.k", value_name = "K")]
    k: Option<String>,
    #[arg(long = "eval.seed", value_name = "SEED")]
    eval_seed: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> Vec<(&'static str, &str)> {
        [
            ("preprocess.target_len", &self.target_len),
            ("features.temporal_k", &self.temporal_k),
            ("features.spatial_block", &self.spatial_block),
            ("svm.regularization_c", &self.regularization_c),
            ("svm.max_epochs", &self.max_epochs),
            ("svm.tolerance", &self.tolerance),
            ("svm.seed", &self.svm_seed),
            ("eval.protocol", &self.protocol),
            ("eval.k", &self.k),
            ("eval.seed", &self.eval_seed),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
        .collect()
    }
}

impl PipelineArgs {
    fn effective_config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        for (k, v) in self.overrides.pairs() {
            cfg.apply_override(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn dataset(&self) -> Result<Dataset> {
        let sets = self
            .data
            .iter()
            .map(|p| Dataset::load(p).with_context(|| format!("loading {}", p.display())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset::pooled(sets)?)
    }
}

/// Parses process arguments, runs the command, and returns the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let stdout = io::stdout();
    match run(cli.command, &mut stdout.lock()) {
        Ok(()) => 0,
        // A closed pipe (`thermact ... | head`) is not a failure.
        Err(e) if is_broken_pipe(&e) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<io::Error>()
            .is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
    })
}

fn run(command: Command, out: &mut dyn io::Write) -> Result<()> {
    match command {
        Command::Generate {
            out: dir,
            subjects,
            reps,
            seed,
            scene,
            durations,
        } => cmd_generate(
            &dir,
            CorpusConfig {
                subjects,
                reps,
                seed,
                durations_s: durations.into_iter().collect(),
                ..CorpusConfig::default()
            },
            scene.as_deref(),
            out,
        ),
        Command::Featurize { pipeline, out: path } => cmd_featurize(&pipeline, path.as_deref(), out),
        Command::Train { pipeline, out: path } => cmd_train(&pipeline, &path, out),
        Command::Evaluate { pipeline, report } => cmd_evaluate(&pipeline, report.as_deref(), out),
        Command::Predict {
            model,
            background,
            scores,
            inputs,
        } => cmd_predict(&model, &background, scores, &inputs, out),
    }
}

fn cmd_generate(
    dir: &Path,
    mut cfg: CorpusConfig,
    scene: Option<&Path>,
    out: &mut dyn io::Write,
) -> Result<()> {
    if cfg.subjects == 0 || cfg.reps == 0 {
        bail!("--subjects and --reps must be positive");
    }
    if let Some(p) = scene {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        cfg.scene = serde_json::from_str::<SceneParams>(&text)
            .with_context(|| format!("parsing scene {}", p.display()))?;
    }
    let corpus = generate_corpus(&cfg)?;
    corpus.write_to(dir)?;
    writeln!(
        out,
        "wrote {} sequences and {} background clips to {} ({} clamped pixel values)",
        corpus.activities().count(),
        corpus.items.len() - corpus.activities().count(),
        dir.display(),
        corpus.clamped
    )?;
    Ok(())
}

fn parse_duration(s: &str) -> Result<(String, f64), String> {
    let (label, secs) = s
        .split_once('=')
        .ok_or_else(|| format!("expected LABEL=SECONDS, got {s:?}"))?;
    let secs: f64 = secs.parse().map_err(|e| format!("bad duration {secs:?}: {e}"))?;
    Ok((label.to_string(), secs))
}

fn cmd_featurize(args: &PipelineArgs, path: Option<&Path>, out: &mut dyn io::Write) -> Result<()> {
    let cfg = args.effective_config()?;
    let dataset = args.dataset()?;
    let rows = featurize_dataset(&dataset, cfg.preprocess.target_len, &cfg.feature_config())?;
    let mut text = String::from("label,subject");
    for j in 0..cfg.feature_config().dimension() {
        let _ = write!(text, ",f{j}");
    }
    text.push('\n');
    for (sample, row) in dataset.samples.iter().zip(&rows) {
        let _ = write!(text, "{},{}", sample.sequence.label(), sample.sequence.subject_id());
        for v in row {
            let _ = write!(text, ",{v:?}");
        }
        text.push('\n');
    }
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn model_bundle(model: &SvmModel, cfg: &PipelineConfig) -> Value {
    let mut value: Value = serde_json::from_str(&model.to_json()).expect("model JSON");
    let obj = value.as_object_mut().expect("model is an object");
    obj.insert("pipeline".into(), cfg.to_json_value());
    obj.insert("tool_version".into(), json!(TOOL_VERSION));
    obj.insert("config_hash".into(), json!(cfg.hash()));
    value
}

fn cmd_train(args: &PipelineArgs, path: &Path, out: &mut dyn io::Write) -> Result<()> {
    let cfg = args.effective_config()?;
    let dataset = args.dataset()?;
    let x = featurize_dataset(&dataset, cfg.preprocess.target_len, &cfg.feature_config())?;
    let y = dataset.class_indices();
    let model = train_indexed(&x, &y, &dataset.label_set, &cfg.svm)?;
    let text = serde_json::to_string_pretty(&model_bundle(&model, &cfg))?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    let correct = x
        .iter()
        .zip(&y)
        .filter(|(xi, &yi)| model.predict(xi).map(|p| p.class_index == yi).unwrap_or(false))
        .count();
    writeln!(
        out,
        "trained on {} sequences, {} classes, {} features; training accuracy {:.2}%",
        x.len(),
        model.classes().len(),
        model.dimension(),
        100.0 * correct as f64 / x.len() as f64
    )?;
    Ok(())
}

fn cmd_evaluate(
    args: &PipelineArgs,
    report_path: Option<&Path>,
    out: &mut dyn io::Write,
) -> Result<()> {
    let cfg = args.effective_config()?;
    let dataset = args.dataset()?;
    let run = run_pipeline_cv(
        &dataset,
        &cfg.protocol(),
        cfg.preprocess.target_len,
        &cfg.feature_config(),
        &cfg.svm,
    )?;
    let mut report = run.report;
    report.provenance = Some(Provenance {
        tool_version: TOOL_VERSION.to_string(),
        config_hash: cfg.hash(),
        config: cfg.to_json_value(),
    });
    if let Some(p) = report_path {
        fs::write(p, serde_json::to_string_pretty(&report)?)
            .with_context(|| format!("writing {}", p.display()))?;
    }
    write!(out, "{}{}", report.confusion, report.summary())?;
    Ok(())
}

fn cmd_predict(
    model_path: &Path,
    background: &Path,
    scores: bool,
    inputs: &[PathBuf],
    out: &mut dyn io::Write,
) -> Result<()> {
    let text = fs::read_to_string(model_path)
        .with_context(|| format!("reading model {}", model_path.display()))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| anyhow!("model file {} is corrupt: {e}", model_path.display()))?;
    let cfg: PipelineConfig = match value.get("pipeline") {
        Some(p) => serde_json::from_value(p.clone())
            .with_context(|| format!("pipeline section of {}", model_path.display()))?,
        None => PipelineConfig::default(),
    };
    let model = SvmModel::from_json_value(value, model_path)?;
    let fcfg = cfg.feature_config();
    if fcfg.dimension() != model.dimension() {
        bail!(
            "model/config mismatch: features produce {} dimensions but the model expects {}",
            fcfg.dimension(),
            model.dimension()
        );
    }
    let extractor = FeatureExtractor::new(fcfg)?;
    let bg_seq = read_sequence(background, ActivityLabel::new("background"), "", "")
        .map_err(|e| anyhow!(e))?;
    let bg = estimate_background(&bg_seq)?;
    for input in inputs {
        let seq = read_sequence(input, ActivityLabel::new("unknown"), "", "").map_err(|e| anyhow!(e))?;
        let features = featurize_sequence(&seq, &bg, cfg.preprocess.target_len, &extractor)
            .with_context(|| input.display().to_string())?;
        let p = model.predict(features.combined())?;
        let mut line = format!("{}\t{}", input.display(), p.label);
        if scores {
            for (c, s) in model.classes().iter().zip(&p.scores) {
                let _ = write!(line, "\t{c}={s:?}");
            }
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}
