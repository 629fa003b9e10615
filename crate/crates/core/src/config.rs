//! Run configuration files and run manifests.
//!
//! A config file is flat TOML. Every key is optional and unknown keys are
//! rejected, so a typo never silently falls back to a default.

use crate::eval::{EvalSettings, Method, MethodSpec};
use crate::gen::GenTargets;
use crate::learn::TrainConfig;
use crate::repr::Variant;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config {path}: {reason}")]
    Parse { path: String, reason: String },
    #[error("config: {0}")]
    Invalid(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data_dir: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub report_dir: Option<PathBuf>,

    pub count: usize,
    pub gen_seed: u64,
    pub mistaken_frame_fraction: f64,
    pub fraction_tolerance: f64,
    pub mean_characters_per_frame: f64,
    pub characters_tolerance: f64,

    pub learning_rate: f64,
    pub batch_size: usize,
    pub k: usize,
    pub weight_decay: f64,
    pub patience: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    pub train_seed: u64,

    pub repetitions: usize,
    pub ablation_repetitions: usize,
    pub base_seed: u64,
    pub methods: Vec<String>,
    pub variant: String,
    pub ablations: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let g = GenTargets::default();
        let t = TrainConfig::default();
        RunConfig {
            data_dir: None,
            model: None,
            report_dir: None,
            count: 1213,
            gen_seed: 0,
            mistaken_frame_fraction: g.mistaken_frame_fraction,
            fraction_tolerance: g.fraction_tolerance,
            mean_characters_per_frame: g.mean_characters_per_frame,
            characters_tolerance: g.characters_tolerance,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            k: t.k,
            weight_decay: t.weight_decay,
            patience: t.patience,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
            max_epochs: t.max_epochs,
            train_seed: t.seed,
            repetitions: 20,
            ablation_repetitions: 6,
            base_seed: 0,
            methods: Method::MAIN.iter().map(|m| m.key().to_string()).collect(),
            variant: Variant::Standard.name().to_string(),
            ablations: [Variant::Centered, Variant::Flipped, Variant::Rewind].iter().map(|v| v.name().to_string()).collect(),
        }
    }
}

impl RunConfig {
    pub fn gen_targets(&self) -> GenTargets {
        GenTargets {
            mistaken_frame_fraction: self.mistaken_frame_fraction,
            fraction_tolerance: self.fraction_tolerance,
            mean_characters_per_frame: self.mean_characters_per_frame,
            characters_tolerance: self.characters_tolerance,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            k: self.k,
            weight_decay: self.weight_decay,
            patience: self.patience,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            max_epochs: self.max_epochs,
            seed: self.train_seed,
        }
    }

    pub fn eval_settings(&self, repetitions: usize) -> EvalSettings {
        EvalSettings { repetitions, base_seed: self.base_seed, train: self.train_config() }
    }

    pub fn method_specs(&self) -> Result<Vec<MethodSpec>, ConfigError> {
        self.methods.iter().map(|m| m.parse::<Method>().map(MethodSpec::new).map_err(ConfigError::Invalid)).collect()
    }

    pub fn train_variant(&self) -> Result<Variant, ConfigError> {
        parse_variant(&self.variant)
    }

    pub fn ablation_variants(&self) -> Result<Vec<Variant>, ConfigError> {
        self.ablations.iter().map(|v| parse_variant(v)).collect()
    }

    /// Checks every field that does not need the file system.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.train_config().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.count == 0 {
            return Err(ConfigError::Invalid("count must be at least 1".into()));
        }
        for (name, v) in [
            ("mistaken_frame_fraction", self.mistaken_frame_fraction),
            ("fraction_tolerance", self.fraction_tolerance),
            ("mean_characters_per_frame", self.mean_characters_per_frame),
            ("characters_tolerance", self.characters_tolerance),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ConfigError::Invalid(format!("{name} must be a non-negative number, got {v}")));
            }
        }
        if self.repetitions < 2 || self.ablation_repetitions < 2 {
            return Err(ConfigError::Invalid("repetitions must be at least 2".into()));
        }
        self.method_specs()?;
        self.train_variant()?;
        self.ablation_variants()?;
        Ok(())
    }
}

fn parse_variant(s: &str) -> Result<Variant, ConfigError> {
    s.parse().map_err(|_| ConfigError::Invalid(format!("unknown variant {s:?}")))
}

pub fn parse_config(text: &str, origin: &str) -> Result<RunConfig, ConfigError> {
    let config: RunConfig =
        toml::from_str(text).map_err(|e| ConfigError::Parse { path: origin.to_string(), reason: e.message().to_string() })?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_config(&text, &path.display().to_string())
}

/// Written as `run-manifest.json` into every output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub command: String,
    pub config: RunConfig,
    pub outcome: serde_json::Value,
}

pub const RUN_MANIFEST: &str = "run-manifest.json";

pub fn save_manifest(config: &RunConfig, command: &str, outcome: serde_json::Value, path: &Path) -> Result<(), ConfigError> {
    let manifest = RunManifest {
        artifact_version: crate::ARTIFACT_VERSION.to_string(),
        command: command.to_string(),
        config: config.clone(),
        outcome,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(path, text).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })
}
