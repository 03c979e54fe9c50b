use serde::{Deserialize, Serialize};

use super::features::{extract_features, QualityFeatures};
use super::{QualityClass, QualityClassifier};
use crate::dsp::Segment;

/// Registry name of the reference classifier.
pub const HEURISTIC_NAME: &str = "heuristic-v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QualityThresholds {
    pub silent_rms: f64,
    pub interference_flatness: f64,
    pub interference_peak_fraction: f64,
    pub talking_rho_voice: f64,
    pub good_rho_fhr: f64,
}

impl Default for QualityThresholds {
    fn default() -> Self {
        Self {
            silent_rms: 0.001,
            interference_flatness: 0.5,
            interference_peak_fraction: 0.8,
            talking_rho_voice: 0.4,
            good_rho_fhr: 0.5,
        }
    }
}

/// The rule that decided a heuristic classification, in precedence order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    SilentRms,
    InterferenceFlatness,
    InterferencePeak,
    TalkingVoice,
    GoodPeriodicity,
    PoorFallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleTrace {
    pub rule: Rule,
    pub class: QualityClass,
    /// Normalized distance past the deciding threshold, in [0, 1].
    pub margin: f64,
    pub features: QualityFeatures,
}

/// First-match rule cascade: Silent, Interference, Talking, Good, else Poor.
#[derive(Debug, Clone, Default)]
pub struct HeuristicClassifier {
    pub thresholds: QualityThresholds,
}

fn margin(value: f64, threshold: f64, span: f64) -> f64 {
    if span <= 0.0 {
        return 1.0;
    }
    ((value - threshold) / span).clamp(0.0, 1.0)
}

impl HeuristicClassifier {
    pub fn new(thresholds: QualityThresholds) -> Self {
        Self { thresholds }
    }

    pub fn decide(&self, f: &QualityFeatures) -> RuleTrace {
        let t = &self.thresholds;
        let (rule, class, margin) = if f.rms < t.silent_rms {
            (
                Rule::SilentRms,
                QualityClass::Silent,
                margin(t.silent_rms, f.rms, t.silent_rms),
            )
        } else if f.flatness > t.interference_flatness {
            let m = margin(f.flatness, t.interference_flatness, 1.0 - t.interference_flatness);
            (Rule::InterferenceFlatness, QualityClass::Interference, m)
        } else if f.peak_bin_fraction > t.interference_peak_fraction {
            let m = margin(
                f.peak_bin_fraction,
                t.interference_peak_fraction,
                1.0 - t.interference_peak_fraction,
            );
            (Rule::InterferencePeak, QualityClass::Interference, m)
        } else if f.rho_voice > t.talking_rho_voice {
            let m = margin(f.rho_voice, t.talking_rho_voice, 1.0 - t.talking_rho_voice);
            (Rule::TalkingVoice, QualityClass::Talking, m)
        } else if f.rho_fhr >= t.good_rho_fhr {
            let m = margin(f.rho_fhr, t.good_rho_fhr, 1.0 - t.good_rho_fhr);
            (Rule::GoodPeriodicity, QualityClass::Good, m)
        } else {
            let m = margin(t.good_rho_fhr, f.rho_fhr, t.good_rho_fhr);
            (Rule::PoorFallback, QualityClass::Poor, m)
        };
        RuleTrace {
            rule,
            class,
            margin,
            features: *f,
        }
    }

    pub fn trace(&self, seg: &Segment) -> RuleTrace {
        self.decide(&extract_features(seg))
    }

    /// Winner gets `0.6 + 0.4 * margin`; the rest is split evenly.
    pub fn scores_for(trace: &RuleTrace) -> Vec<f64> {
        let win = 0.6 + 0.4 * trace.margin;
        let rest = (1.0 - win) / 4.0;
        QualityClass::ALL
            .iter()
            .map(|c| if *c == trace.class { win } else { rest })
            .collect()
    }
}

impl QualityClassifier for HeuristicClassifier {
    fn name(&self) -> &str {
        HEURISTIC_NAME
    }

    fn scores(&self, seg: &Segment) -> Result<Vec<f64>, String> {
        Ok(Self::scores_for(&self.trace(seg)))
    }
}
