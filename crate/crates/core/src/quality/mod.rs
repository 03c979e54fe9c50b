//! Five-class signal quality gate.
//!
//! Any [`QualityClassifier`] can be plugged in; [`classify`] validates and
//! normalizes its scores. The default is [`HeuristicClassifier`], a fixed
//! rule cascade over [`QualityFeatures`].

mod features;
mod heuristic;
mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::Segment;

pub use features::{extract_features, spectral_flatness, QualityFeatures, FLATNESS_BAND};
pub use heuristic::{HeuristicClassifier, QualityThresholds, Rule, RuleTrace, HEURISTIC_NAME};
pub use report::{quality_report, ConfusionReport};

/// Ordered by tie-break precedence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QualityClass {
    Good,
    Poor,
    Interference,
    Talking,
    Silent,
}

impl QualityClass {
    pub const ALL: [QualityClass; 5] = [
        QualityClass::Good,
        QualityClass::Poor,
        QualityClass::Interference,
        QualityClass::Talking,
        QualityClass::Silent,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            QualityClass::Good => "Good",
            QualityClass::Poor => "Poor",
            QualityClass::Interference => "Interference",
            QualityClass::Talking => "Talking",
            QualityClass::Silent => "Silent",
        }
    }
}

impl fmt::Display for QualityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QualityClass {
    type Err = QualityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        QualityClass::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| QualityError::UnknownClass(s.to_string()))
    }
}

/// One value per class, serialized with the class names as keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerClass<T> {
    #[serde(rename = "Good")]
    pub good: T,
    #[serde(rename = "Poor")]
    pub poor: T,
    #[serde(rename = "Interference")]
    pub interference: T,
    #[serde(rename = "Talking")]
    pub talking: T,
    #[serde(rename = "Silent")]
    pub silent: T,
}

impl<T: Copy> PerClass<T> {
    pub fn from_array(a: [T; 5]) -> Self {
        Self {
            good: a[0],
            poor: a[1],
            interference: a[2],
            talking: a[3],
            silent: a[4],
        }
    }

    pub fn to_array(&self) -> [T; 5] {
        [self.good, self.poor, self.interference, self.talking, self.silent]
    }

    pub fn get(&self, class: QualityClass) -> T {
        self.to_array()[class.index()]
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QualityError {
    #[error("classifier {model} failed: {reason}")]
    ModelFailure { model: String, reason: String },
    #[error("{labels} labels but {truth} truth values")]
    LengthMismatch { labels: usize, truth: usize },
    #[error("empty evaluation set")]
    Empty,
    #[error("unknown quality class {0:?}")]
    UnknownClass(String),
}

/// Classifier output: a class plus normalized per-class scores.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityLabel {
    pub class: QualityClass,
    /// Indexed by [`QualityClass::index`]; sums to 1.
    pub scores: [f64; 5],
}

impl QualityLabel {
    /// Normalizes raw scores and picks the argmax (ties go to the earlier class).
    pub fn from_scores(raw: &[f64]) -> Result<Self, String> {
        if raw.len() != 5 {
            return Err(format!("expected 5 scores, got {}", raw.len()));
        }
        if let Some(v) = raw.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(format!("score {v} is not a finite non-negative value"));
        }
        let total: f64 = raw.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err("scores cannot be normalized".to_string());
        }
        let mut scores = [0.0; 5];
        for (s, r) in scores.iter_mut().zip(raw) {
            *s = r / total;
        }
        let mut best = 0;
        for i in 1..5 {
            if scores[i] > scores[best] {
                best = i;
            }
        }
        Ok(Self {
            class: QualityClass::ALL[best],
            scores,
        })
    }

    pub fn score(&self, class: QualityClass) -> f64 {
        self.scores[class.index()]
    }
}

/// Pluggable segment classifier returning one raw score per class in
/// [`QualityClass::ALL`] order.
pub trait QualityClassifier: Send + Sync {
    fn name(&self) -> &str;
    fn scores(&self, seg: &Segment) -> Result<Vec<f64>, String>;
}

pub fn classify(seg: &Segment, model: &dyn QualityClassifier) -> Result<QualityLabel, QualityError> {
    let failure = |reason: String| QualityError::ModelFailure {
        model: model.name().to_string(),
        reason,
    };
    let raw = model.scores(seg).map_err(failure)?;
    QualityLabel::from_scores(&raw).map_err(failure)
}
