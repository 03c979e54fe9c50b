//! Gestational-age aggregation over good-quality windows.
//!
//! A recording contributes at most [`MAX_WINDOWS`] windows: the first ones
//! labelled Good. Each is scored by a [`WindowScorer`] and the scores are
//! averaged. A [`SequenceScorer`] variant hands the whole selection to one
//! model instead.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::Segment;
use crate::fhr::{estimate_fhr, FhrError};
use crate::quality::{QualityClass, QualityLabel};

pub const MAX_WINDOWS: usize = 10;
pub const MIN_WEEKS: f64 = 10.0;
pub const MAX_WEEKS: f64 = 45.0;

/// Registry name of [`AffineFhrScorer`].
pub const AFFINE_FHR_NAME: &str = "affine-fhr-v0";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaError {
    #[error("no Good windows to score")]
    NoGoodWindows,
    #[error("scorer {scorer} returned {value}, outside {MIN_WEEKS}..={MAX_WEEKS} weeks")]
    ScorerFailure { scorer: String, value: f64 },
    #[error(transparent)]
    Fhr(#[from] FhrError),
}

impl GaError {
    pub fn reason(&self) -> &'static str {
        match self {
            GaError::NoGoodWindows => "no_good_windows",
            GaError::ScorerFailure { .. } => "scorer_failure",
            GaError::Fhr(e) => e.reason(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaEstimate {
    pub weeks: f64,
    pub n_windows_used: usize,
    pub window_scores: Vec<f64>,
}

/// Per-window GA model.
pub trait WindowScorer: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, seg: &Segment) -> Result<f64, GaError>;
}

/// Whole-recording GA model consuming the selected windows jointly.
pub trait SequenceScorer: Send + Sync {
    fn name(&self) -> &str;
    fn score_sequence(&self, windows: &[&Segment]) -> Result<f64, GaError>;
}

/// Placeholder affine map from heart rate to weeks. It carries no
/// physiological claim; it only gives the aggregation something
/// deterministic to average.
#[derive(Debug, Clone, Copy, Default)]
pub struct AffineFhrScorer;

pub fn weeks_from_bpm(bpm: f64) -> f64 {
    (44.0 - 0.07 * (bpm - 110.0)).clamp(MIN_WEEKS, MAX_WEEKS)
}

impl WindowScorer for AffineFhrScorer {
    fn name(&self) -> &str {
        AFFINE_FHR_NAME
    }

    fn score(&self, seg: &Segment) -> Result<f64, GaError> {
        Ok(weeks_from_bpm(estimate_fhr(seg)?.bpm))
    }
}

pub fn reference_score(seg: &Segment) -> Result<f64, GaError> {
    AffineFhrScorer.score(seg)
}

/// First [`MAX_WINDOWS`] Good windows, in input order.
pub fn select_windows(labeled: &[(Segment, QualityLabel)]) -> Result<Vec<&Segment>, GaError> {
    let picked: Vec<&Segment> = labeled
        .iter()
        .filter(|(_, l)| l.class == QualityClass::Good)
        .map(|(s, _)| s)
        .take(MAX_WINDOWS)
        .collect();
    if picked.is_empty() {
        Err(GaError::NoGoodWindows)
    } else {
        Ok(picked)
    }
}

fn check_weeks(scorer: &str, value: f64) -> Result<f64, GaError> {
    if value.is_finite() && (MIN_WEEKS..=MAX_WEEKS).contains(&value) {
        Ok(value)
    } else {
        Err(GaError::ScorerFailure {
            scorer: scorer.to_string(),
            value,
        })
    }
}

/// Order-independent mean: values are summed in sorted order with a running
/// mean, so any permutation gives the same bits and `n` copies of `c` give
/// exactly `c`.
pub fn stable_mean(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut mean = 0.0;
    for (i, v) in sorted.iter().enumerate() {
        mean += (v - mean) / (i + 1) as f64;
    }
    mean
}

/// Averages already-validated window scores (at most [`MAX_WINDOWS`] are used).
pub fn aggregate(scores: &[f64]) -> Result<GaEstimate, GaError> {
    let used = &scores[..scores.len().min(MAX_WINDOWS)];
    if used.is_empty() {
        return Err(GaError::NoGoodWindows);
    }
    Ok(GaEstimate {
        weeks: stable_mean(used).clamp(MIN_WEEKS, MAX_WEEKS),
        n_windows_used: used.len(),
        window_scores: used.to_vec(),
    })
}

pub fn estimate_ga(
    labeled: &[(Segment, QualityLabel)],
    scorer: &dyn WindowScorer,
) -> Result<GaEstimate, GaError> {
    let scores = select_windows(labeled)?
        .into_iter()
        .map(|s| scorer.score(s).and_then(|v| check_weeks(scorer.name(), v)))
        .collect::<Result<Vec<_>, _>>()?;
    aggregate(&scores)
}

/// Sequence-model variant: one score for the whole selection, reported as
/// the single entry of `window_scores`.
pub fn estimate_ga_sequence(
    labeled: &[(Segment, QualityLabel)],
    scorer: &dyn SequenceScorer,
) -> Result<GaEstimate, GaError> {
    let windows = select_windows(labeled)?;
    let weeks = check_weeks(scorer.name(), scorer.score_sequence(&windows)?)?;
    Ok(GaEstimate {
        weeks,
        n_windows_used: windows.len(),
        window_scores: vec![weeks],
    })
}

/// Running collector used by the live pipeline: keeps the scores of the
/// first [`MAX_WINDOWS`] Good windows offered.
#[derive(Debug, Clone, Default)]
pub struct GaCollector {
    scores: Vec<f64>,
}

impl GaCollector {
    pub fn is_full(&self) -> bool {
        self.scores.len() >= MAX_WINDOWS
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Scores and keeps `seg` if there is room. Returns whether the
    /// collection changed.
    pub fn offer(&mut self, seg: &Segment, scorer: &dyn WindowScorer) -> Result<bool, GaError> {
        if self.is_full() {
            return Ok(false);
        }
        let v = check_weeks(scorer.name(), scorer.score(seg)?)?;
        self.scores.push(v);
        Ok(true)
    }

    pub fn estimate(&self) -> Result<GaEstimate, GaError> {
        aggregate(&self.scores)
    }
}
