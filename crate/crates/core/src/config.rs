//! Runtime configuration and the model registry.
//!
//! A config file is optional JSON; any field it omits keeps its default.
//! The SHA-256 of the effective config (canonical JSON) goes into every
//! session log header so two runs can be checked for matching settings.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bp::{LcdDetector, OtsuDetector, OTSU_DETECTOR_NAME};
use crate::dsp::{DEFAULT_RING_CAPACITY, WINDOW_LEN};
use crate::ga::{AffineFhrScorer, WindowScorer, AFFINE_FHR_NAME};
use crate::quality::{HeuristicClassifier, QualityClassifier, QualityThresholds};

pub use crate::quality::HEURISTIC_NAME;

pub const DEFAULT_TICK_BUDGET_MS: f64 = 250.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unknown {kind} {name:?}")]
    UnknownModel { kind: &'static str, name: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub classifier: String,
    pub scorer: String,
    pub detector: String,
    pub quality: QualityThresholds,
    pub ring_capacity: usize,
    pub tick_budget_ms: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            classifier: HEURISTIC_NAME.to_string(),
            scorer: AFFINE_FHR_NAME.to_string(),
            detector: OTSU_DETECTOR_NAME.to_string(),
            quality: QualityThresholds::default(),
            ring_capacity: DEFAULT_RING_CAPACITY,
            tick_budget_ms: DEFAULT_TICK_BUDGET_MS,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.ring_capacity < WINDOW_LEN {
            return Err(ConfigError::Invalid(format!(
                "ring_capacity {} is smaller than one {WINDOW_LEN}-sample window",
                self.ring_capacity
            )));
        }
        if !(self.tick_budget_ms > 0.0 && self.tick_budget_ms.is_finite()) {
            return Err(ConfigError::Invalid("tick_budget_ms must be positive".into()));
        }
        self.classifier()?;
        self.scorer()?;
        self.detector()?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn sha256_hex(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn classifier(&self) -> Result<Box<dyn QualityClassifier>, ConfigError> {
        match self.classifier.as_str() {
            HEURISTIC_NAME => Ok(Box::new(HeuristicClassifier::new(self.quality))),
            other => Err(ConfigError::UnknownModel {
                kind: "classifier",
                name: other.to_string(),
            }),
        }
    }

    pub fn scorer(&self) -> Result<Box<dyn WindowScorer>, ConfigError> {
        match self.scorer.as_str() {
            AFFINE_FHR_NAME => Ok(Box::new(AffineFhrScorer)),
            other => Err(ConfigError::UnknownModel {
                kind: "scorer",
                name: other.to_string(),
            }),
        }
    }

    pub fn detector(&self) -> Result<Box<dyn LcdDetector>, ConfigError> {
        detector_by_name(&self.detector)
    }
}

pub fn detector_by_name(name: &str) -> Result<Box<dyn LcdDetector>, ConfigError> {
    match name {
        OTSU_DETECTOR_NAME => Ok(Box::new(OtsuDetector)),
        other => Err(ConfigError::UnknownModel {
            kind: "detector",
            name: other.to_string(),
        }),
    }
}
