use super::{EpochRecord, LearnError, ModelParams, TrainConfig};
use crate::repr::FeatureKind;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const MODEL_VERSION: u32 = 1;

/// On-disk model: kernel, bias, the config it was trained with and its history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub version: u32,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub b: f64,
    /// Row-major K×D.
    pub w: Vec<f64>,
    pub features: FeatureKind,
    pub config: TrainConfig,
    pub history: Vec<EpochRecord>,
}

impl ModelFile {
    pub fn new(params: &ModelParams, features: FeatureKind, config: &TrainConfig, history: &[EpochRecord]) -> Self {
        ModelFile {
            version: MODEL_VERSION,
            k: params.k,
            d: params.d,
            b: params.b,
            w: params.w.clone(),
            features,
            config: config.clone(),
            history: history.to_vec(),
        }
    }

    pub fn params(&self) -> ModelParams {
        ModelParams { k: self.k, d: self.d, w: self.w.clone(), b: self.b }
    }
}

pub fn write_model(path: &Path, model: &ModelFile) -> Result<(), LearnError> {
    let mut text = serde_json::to_string_pretty(model).map_err(|e| LearnError::ModelFile(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|source| LearnError::Io { path: path.display().to_string(), source })
}

pub fn read_model(path: &Path) -> Result<ModelFile, LearnError> {
    let text = std::fs::read_to_string(path).map_err(|source| LearnError::Io { path: path.display().to_string(), source })?;
    let m: ModelFile = serde_json::from_str(&text).map_err(|e| LearnError::ModelFile(e.to_string()))?;
    if m.version != MODEL_VERSION {
        return Err(LearnError::ModelFile(format!("unsupported version {}", m.version)));
    }
    if m.w.len() != m.k * m.d {
        return Err(LearnError::ModelFile(format!("w has {} entries, expected K*D = {}", m.w.len(), m.k * m.d)));
    }
    if !m.params().is_finite() {
        return Err(LearnError::ModelFile("non-finite parameter".into()));
    }
    Ok(m)
}
